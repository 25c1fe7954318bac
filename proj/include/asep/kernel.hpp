#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "asep/core.hpp"
#include "asep/errors.hpp"
#include "asep/quadrature.hpp"

namespace asep {

inline constexpr double kPoleThreshold = 1e-14;

/// Bijection i -> sigma(i) on {1..N}, stored 1-based.
class Permutation {
 public:
  explicit Permutation(std::vector<int> images) : img_(std::move(images)) {
    std::vector<int> s = img_;
    std::sort(s.begin(), s.end());
    for (std::size_t i = 0; i < s.size(); ++i)
      if (s[i] != static_cast<int>(i) + 1) throw DomainError("Permutation images must be a bijection on 1..N");
  }
  static Permutation identity(int n) {
    std::vector<int> v(static_cast<std::size_t>(n));
    std::iota(v.begin(), v.end(), 1);
    return Permutation(std::move(v));
  }

  int size() const noexcept { return static_cast<int>(img_.size()); }
  /// sigma(i), 1-based.
  int operator()(int i) const { return img_[static_cast<std::size_t>(i - 1)]; }
  std::span<const int> images() const noexcept { return img_; }

  int inversion_count() const noexcept {
    int c = 0;
    for (std::size_t i = 0; i < img_.size(); ++i)
      for (std::size_t j = i + 1; j < img_.size(); ++j) c += img_[i] > img_[j];
    return c;
  }
  int sign() const noexcept { return inversion_count() % 2 ? -1 : 1; }

  /// T_i sigma: swap the entries at positions i and i+1.
  Permutation transposed(int i) const {
    if (i < 1 || i >= size()) throw DomainError("transposition index out of range");
    auto v = img_;
    std::swap(v[static_cast<std::size_t>(i - 1)], v[static_cast<std::size_t>(i)]);
    return Permutation(std::move(v));
  }

  friend bool operator==(const Permutation&, const Permutation&) = default;

 private:
  std::vector<int> img_;
};

/// Visits S_N in lexicographic order, passing the sign tracked incrementally.
template <class F>
void for_each_permutation(int n, F&& visit) {
  std::vector<int> v(static_cast<std::size_t>(n));
  std::iota(v.begin(), v.end(), 1);
  int sign = 1;
  do {
    visit(Permutation(v), sign);
    // next_permutation: the suffix reversal and the pivot swap fix the parity.
    auto w = v;
    if (!std::next_permutation(w.begin(), w.end())) break;
    int i = n - 2;
    while (v[static_cast<std::size_t>(i)] >= v[static_cast<std::size_t>(i + 1)]) --i;
    const int suffix = n - 1 - i;
    const int flips = 1 + (suffix * (suffix - 1) / 2);
    if (flips % 2) sign = -sign;
    v = std::move(w);
  } while (true);
}

/// xi^n for integer n, by repeated squaring of xi or 1/xi.
inline cplx cpow_int(cplx z, long long n) {
  if (n < 0) {
    z = 1.0 / z;
    n = -n;
  }
  cplx r = 1.0;
  while (n) {
    if (n & 1) r *= z;
    z *= z;
    n >>= 1;
  }
  return r;
}

namespace detail {
inline cplx checked(cplx den, const char* what) {
  if (std::abs(den) < kPoleThreshold) throw PoleError(std::string("denominator ") + what + " vanished on the contour");
  return den;
}
}  // namespace detail

/// eps(xi) = p/xi + q xi - 1.
inline cplx epsilon(cplx xi, const ModelParams& mp) {
  if (xi == cplx(0.0)) throw DomainError("epsilon is undefined at xi = 0");
  return mp.p() / xi + mp.q() * xi - 1.0;
}

/// p + q a b - a, the building block of every S-factor.
inline cplx pair_factor(cplx a, cplx b, const ModelParams& mp) { return mp.p() + mp.q() * a * b - a; }

/// S_{ab} = -(p + q xa xb - xa)/(p + q xa xb - xb).
inline cplx s_factor(cplx xa, cplx xb, const ModelParams& mp) {
  return -pair_factor(xa, xb, mp) / detail::checked(pair_factor(xb, xa, mp), "of S_ab");
}

/// A_sigma: product of S_{sigma(i) sigma(j)} over inversions i < j, sigma(i) > sigma(j).
inline cplx bethe_amplitude(const Permutation& s, std::span<const cplx> xi, const ModelParams& mp) {
  if (static_cast<int>(xi.size()) != s.size()) throw DomainError("bethe_amplitude: dimension mismatch");
  cplx a = 1.0;
  const int n = s.size();
  for (int i = 1; i <= n; ++i)
    for (int j = i + 1; j <= n; ++j)
      if (s(i) > s(j))
        a *= s_factor(xi[static_cast<std::size_t>(s(i) - 1)], xi[static_cast<std::size_t>(s(j) - 1)], mp);
  return a;
}

/// Ratio form: sgn sigma prod_{i<j}(p+q xs_i xs_j - xs_i) / prod_{i<j}(p+q xi_i xi_j - xi_i),
/// with xs_i = xi_{sigma(i)}.
inline cplx bethe_amplitude_ratio(const Permutation& s, std::span<const cplx> xi, const ModelParams& mp) {
  cplx num = 1.0, den = 1.0;
  const int n = s.size();
  for (int i = 1; i <= n; ++i)
    for (int j = i + 1; j <= n; ++j) {
      num *= pair_factor(xi[static_cast<std::size_t>(s(i) - 1)], xi[static_cast<std::size_t>(s(j) - 1)], mp);
      den *= pair_factor(xi[static_cast<std::size_t>(i - 1)], xi[static_cast<std::size_t>(j - 1)], mp);
    }
  return static_cast<double>(s.sign()) * num / detail::checked(den, "of the amplitude ratio");
}

/// Observation site, initial configuration, time and rates for one integrand.
struct IntegrandParams {
  Site x = 0;
  Configuration Y;
  double t = 0.0;
  ModelParams params{0.5, 0.5};
};

/// prod_i xi_i^{e_i} e^{eps(xi_i) t}.
inline cplx power_exp_factor(std::span<const cplx> xi, std::span<const long long> e, double t, const ModelParams& mp) {
  cplx v = 1.0, eps_sum = 0.0;
  for (std::size_t i = 0; i < xi.size(); ++i) {
    v *= cpow_int(xi[i], e[i]);
    eps_sum += epsilon(xi[i], mp);
  }
  return v * std::exp(eps_sum * t);
}

/// prod_{i<j} (xi_j - xi_i)/(p + q xi_i xi_j - xi_i).
inline cplx vandermonde_ratio(std::span<const cplx> xi, const ModelParams& mp) {
  cplx v = 1.0;
  for (std::size_t i = 0; i < xi.size(); ++i)
    for (std::size_t j = i + 1; j < xi.size(); ++j)
      v *= (xi[j] - xi[i]) / detail::checked(pair_factor(xi[i], xi[j], mp), "p+q xi_i xi_j - xi_i");
  return v;
}

namespace detail {
inline std::vector<long long> exponents(Site x, const Configuration& y) {
  std::vector<long long> e;
  e.reserve(y.size());
  for (Site v : y) e.push_back(x - v - 1);
  return e;
}
}  // namespace detail

/// I(x, Y, xi) with Y already restricted to the active index set.
inline cplx integrand_I(const IntegrandParams& ip, std::span<const cplx> xi) {
  if (xi.size() != ip.Y.size()) throw DomainError("integrand_I: |xi| must equal |Y|");
  cplx prod = 1.0, den = 1.0;
  for (cplx z : xi) {
    prod *= z;
    den *= 1.0 - z;
  }
  const auto e = detail::exponents(ip.x, ip.Y);
  return vandermonde_ratio(xi, ip.params) * (1.0 - prod) / detail::checked(den, "prod(1 - xi_i)") *
         power_exp_factor(xi, e, ip.t, ip.params);
}

/// I(x, Y_S, xi); ip.Y is the full configuration.
inline cplx integrand_I(const IndexSet& s, const IntegrandParams& ip, std::span<const cplx> xi) {
  IntegrandParams sub{ip.x, restrict_to(ip.Y, s), ip.t, ip.params};
  return integrand_I(sub, xi);
}

/// The CDF integrand: I with the (1 - prod xi) numerator replaced by 1.
inline cplx integrand_Q(const IntegrandParams& ip, std::span<const cplx> xi) {
  if (xi.size() != ip.Y.size()) throw DomainError("integrand_Q: |xi| must equal |Y|");
  cplx den = 1.0;
  for (cplx z : xi) den *= 1.0 - z;
  const auto e = detail::exponents(ip.x, ip.Y);
  return vandermonde_ratio(xi, ip.params) / detail::checked(den, "prod(1 - xi_i)") *
         power_exp_factor(xi, e, ip.t, ip.params);
}

/// I(x, Y_{T,U}, xi). xi is indexed by the sorted members of T u U and
/// ip.Y is the full configuration.
inline cplx integrand_I_TU(const IndexSet& T, const IndexSet& U, const IntegrandParams& ip, std::span<const cplx> xi) {
  if (!T.disjoint_from(U)) throw DomainError("integrand_I_TU requires disjoint T and U");
  const IndexSet all = T.set_union(U);
  if (static_cast<int>(xi.size()) != all.size()) throw DomainError("integrand_I_TU: |xi| must equal |T u U|");
  const auto mem = all.members();
  const auto& mp = ip.params;
  std::vector<char> in_u(mem.size());
  for (std::size_t a = 0; a < mem.size(); ++a) in_u[a] = U.contains(mem[a]);
  cplx prod_u = 1.0, v = 1.0, den = 1.0;
  for (std::size_t a = 0; a < mem.size(); ++a) {
    if (in_u[a]) prod_u *= xi[a];
    den *= 1.0 - xi[a];
  }
  v = (1.0 - prod_u) / detail::checked(den, "prod(1 - xi_i)");
  for (std::size_t a = 0; a < mem.size(); ++a)
    for (std::size_t b = a + 1; b < mem.size(); ++b) {
      if (in_u[a] == in_u[b]) v *= xi[b] - xi[a];
      v /= detail::checked(pair_factor(xi[a], xi[b], mp), "p+q xi_i xi_j - xi_i");
    }
  for (std::size_t a = 0; a < mem.size(); ++a)
    if (!in_u[a])
      for (std::size_t b = 0; b < mem.size(); ++b)
        if (in_u[b]) v *= pair_factor(xi[a], xi[b], mp);
  std::vector<long long> e(mem.size());
  for (std::size_t a = 0; a < mem.size(); ++a) e[a] = ip.x - ip.Y.at1(mem[a]) - 1;
  return v * power_exp_factor(xi, e, ip.t, mp);
}

/// J_k(x, xi) for the step initial condition.
inline cplx integrand_J(int k, Site x, double t, const ModelParams& mp, std::span<const cplx> xi) {
  if (static_cast<int>(xi.size()) != k || k < 1) throw DomainError("integrand_J: |xi| must equal k >= 1");
  if (!(mp.q() > 0.0)) throw DomainError("integrand_J requires q > 0");
  cplx v = 1.0, prod = 1.0, den = 1.0;
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j)
      if (i != j)
        v *= (xi[static_cast<std::size_t>(j)] - xi[static_cast<std::size_t>(i)]) /
             detail::checked(pair_factor(xi[static_cast<std::size_t>(i)], xi[static_cast<std::size_t>(j)], mp),
                             "p+q xi_i xi_j - xi_i");
  for (cplx z : xi) {
    prod *= z;
    den *= (1.0 - z) * (mp.q() * z - mp.p());
  }
  std::vector<long long> e(static_cast<std::size_t>(k), x - 1);
  return v * (1.0 - prod) / detail::checked(den, "prod (1 - xi_i)(q xi_i - p)") * power_exp_factor(xi, e, t, mp);
}

/// psi_N(xi; z) from the expected-position formula.
inline cplx integrand_psi(std::span<const long long> z, double t, const ModelParams& mp, std::span<const cplx> xi) {
  const std::size_t n = xi.size();
  if (z.size() != n || n == 0) throw DomainError("integrand_psi: |z| must equal |xi| >= 1");
  cplx prod = 1.0;
  for (cplx w : xi) prod *= w;
  const cplx inv = 1.0 / prod;
  cplx v = ipow(mp.p(), static_cast<long long>(n * (n + 1) / 2)) * vandermonde_ratio(xi, mp);
  cplx den = 1.0;
  for (std::size_t i = 0; i < n; ++i) {
    v *= (inv - xi[i]) / detail::checked(pair_factor(xi[i], inv, mp), "p+q xi_i/prod - xi_i");
    den *= 1.0 - xi[i];
  }
  v /= detail::checked(1.0 - prod, "1 - prod xi") * detail::checked(den, "prod(1 - xi_i)");
  return v * power_exp_factor(xi, z, t, mp) * std::exp(epsilon(inv, mp) * t);
}

}  // namespace asep
