#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <string>
#include <vector>

#include "asep/core.hpp"
#include "asep/errors.hpp"
#include "asep/kernel.hpp"
#include "asep/quadrature.hpp"
#include "asep/summation.hpp"

namespace asep {

/// e^{-x} I_n(x) for n = 0..n_max at one argument; I_{-n} = I_n.
struct BesselTable {
  double arg = 0.0;
  std::vector<double> scaled;

  int n_max() const noexcept { return static_cast<int>(scaled.size()) - 1; }
  double scaled_at(int n) const {
    n = std::abs(n);
    if (n > n_max()) throw DomainError("BesselTable order " + std::to_string(n) + " beyond n_max");
    return scaled[static_cast<std::size_t>(n)];
  }
  double at(int n) const {
    const double v = scaled_at(n) * std::exp(arg);
    if (!std::isfinite(v)) throw EvaluationError("I_n(" + std::to_string(arg) + ") overflows double");
    return v;
  }
};

/// Miller's downward recurrence I_{k-1} = (2k/x) I_k + I_{k+1}, normalized by
/// e^x = I_0 + 2 sum_{k>=1} I_k. Small arguments use the power series.
inline BesselTable bessel_table(int n_max, double x) {
  if (n_max < 0 || n_max > 10000) throw DomainError("bessel order must satisfy |n| <= 10^4");
  if (!(x >= 0.0) || !std::isfinite(x)) throw DomainError("bessel argument must be finite and nonnegative");
  BesselTable tab{x, std::vector<double>(static_cast<std::size_t>(n_max) + 1, 0.0)};
  if (x == 0.0) {
    tab.scaled[0] = 1.0;
    return tab;
  }
  if (x <= 1.0) {
    const double h = 0.5 * x, lh = std::log(h), ex = std::exp(-x);
    for (int n = 0; n <= n_max; ++n) {
      const double lead = n * lh - std::lgamma(n + 1.0);
      if (lead < -745.0) break;  // underflows, and so do all higher orders
      double term = std::exp(lead), sum = 0.0;
      for (int k = 0; k < 200 && term > 1e-18 * sum; ++k) {
        sum += term;
        term *= h * h / ((k + 1.0) * (k + 1.0 + n));
      }
      tab.scaled[static_cast<std::size_t>(n)] = sum * ex;
    }
    return tab;
  }
  const int top = std::max(n_max, static_cast<int>(std::ceil(x))) + 40 +
                  static_cast<int>(std::ceil(6.0 * std::sqrt(std::max(n_max, static_cast<int>(x)) + 1.0)));
  std::vector<double> v(static_cast<std::size_t>(top) + 2, 0.0);
  v[static_cast<std::size_t>(top) + 1] = 0.0;
  v[static_cast<std::size_t>(top)] = 1e-300;
  for (int k = top; k >= 1; --k) {
    v[static_cast<std::size_t>(k) - 1] = (2.0 * k / x) * v[static_cast<std::size_t>(k)] + v[static_cast<std::size_t>(k) + 1];
    if (v[static_cast<std::size_t>(k) - 1] > 1e250)
      for (int j = k - 1; j <= top; ++j) v[static_cast<std::size_t>(j)] *= 1e-250;
  }
  NeumaierSum norm;
  for (int k = top; k >= 1; --k) norm += 2.0 * v[static_cast<std::size_t>(k)];
  norm += v[0];
  const double inv = 1.0 / norm.value();
  for (int n = 0; n <= n_max; ++n) tab.scaled[static_cast<std::size_t>(n)] = v[static_cast<std::size_t>(n)] * inv;
  return tab;
}

/// Modified Bessel function of the first kind I_n(x).
inline double bessel_i(int n, double x) { return bessel_table(std::abs(n), x).at(n); }

/// Closed form of \oint_{C_r} psi_1(xi; z) dxi:
///   2pt e^{-2t}[I_{z-1} + I_z] + (2z-1) p {e^{-2t} I_0 / 2 - 1/2 + e^{-2t} sum_{j=1}^{z-1} I_j}, all at 2t.
inline double psi1_bessel(long long z, double t, const ModelParams& mp) {
  if (z < 1) throw DomainError("psi1_bessel requires z >= 1");
  if (!(t >= 0.0) || !std::isfinite(t)) throw DomainError("t must be finite and nonnegative");
  // The brace equals -sum_{j>=z} e^{-2t} I_j(2t) since e^{-x}(I_0 + 2 sum_{j>=1} I_j) = 1;
  // summing that tail avoids the cancellation at small t.
  const int top = static_cast<int>(z) + 60 + static_cast<int>(std::ceil(8.0 * t));
  const auto tab = bessel_table(top, 2.0 * t);
  const double p = mp.p();
  NeumaierSum brace;
  for (int j = top; j >= z; --j) brace += -tab.scaled_at(j);
  return 2.0 * p * t * (tab.scaled_at(static_cast<int>(z - 1)) + tab.scaled_at(static_cast<int>(z))) +
         static_cast<double>(2 * z - 1) * p * brace.value();
}

struct MomentOptions {
  double tol = 1e-10;
  double safety = 0.5;        // radius factor for psi_1
  double multi_safety = 0.85;  // for j >= 2, where e^{q t / prod xi} punishes small circles
  int max_j = 4;  // psi_j integrals above this dimension are refused
  QuadOptions quad{};
};

struct PsiResult {
  double value = 0.0;
  double error_estimate = 0.0;
  double imag = 0.0;
  double radius = 0.0;
  int nodes_used = 0;
};

/// Largest admissible radius for the psi_j contours: safety times the smallest
/// of 1, r*, and the root of r^{j-1}(p + r) = q, below which the poles of
/// 1/(p + q xi_i/(xi_1...xi_j) - xi_i) stay off the torus.
inline double psi_radius(int j, const ModelParams& mp, double safety) {
  double r = small_radius(mp, safety) / safety;
  const double p = mp.p(), q = mp.q();
  if (j >= 2 && q > 0.0) {
    double lo = 0.0, hi = 1.0;
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      (ipow(mid, j - 1) * (p + mid) < q ? lo : hi) = mid;
    }
    r = std::min(r, lo);
  }
  return safety * r;
}

/// Radius in (0, r_max] minimizing a log-size model of |psi_j| on the torus,
///   (sum z_i - j^2) log r + t (j (p/r + q r) + p r^j + q r^{-j}).
/// Any radius below r_max gives the same integral; this one keeps the samples
/// near the size of the result.
inline double psi_saddle_radius(std::span<const long long> z, double t, const ModelParams& mp, double r_max) {
  const int j = static_cast<int>(z.size());
  double zs = 0.0;
  for (long long v : z) zs += static_cast<double>(v);
  const double p = mp.p(), q = mp.q();
  auto phi = [&](double r) {
    return (zs - j * j) * std::log(r) + t * (j * (p / r + q * r) + p * ipow(r, j) + q * ipow(r, -j));
  };
  double best = r_max, best_phi = phi(r_max);
  for (int k = 1; k <= 400; ++k) {
    const double r = r_max * std::pow(1e-3, k / 400.0);
    if (const double v = phi(r); v < best_phi) {
      best = r;
      best_phi = v;
    }
  }
  return best;
}

/// \oint_{C_r}...\oint_{C_r} psi_j(xi; z) d^j xi.
inline PsiResult psi_integral(int j, std::span<const long long> z, double t, const ModelParams& mp,
                              const MomentOptions& o = {}) {
  if (!(mp.p() > 0.0)) throw DomainError("psi_integral requires p > 0");
  if (j < 1 || static_cast<std::size_t>(j) != z.size())
    throw DomainError("psi_integral needs j >= 1 exponents");
  for (std::size_t i = 0; i < z.size(); ++i)
    if (z[i] < 1 || (i > 0 && z[i] >= z[i - 1]))
      throw DomainError("psi_integral exponents must be positive gaps y_{j+1} - y_i (decreasing in i)");
  if (j > o.max_j)
    throw BudgetError("psi_integral: dimension " + std::to_string(j) + " exceeds the limit " + std::to_string(o.max_j));
  const double r = psi_saddle_radius(z, t, mp, psi_radius(j, mp, j == 1 ? o.safety : o.multi_safety));
  if (ipow(r, j) < 1e-12) throw BudgetError("psi_integral: r^j falls below the machine floor");
  QuadOptions qo = o.quad;
  qo.tol = o.tol;
  std::vector<long long> zz(z.begin(), z.end());
  auto f = [&](std::span<const cplx> xi) { return integrand_psi(zz, t, mp, xi); };
  const auto q = integrate_torus(f, j, r, qo);
  PsiResult out{q.value.real(), q.error_estimate + q.roundoff(), q.value.imag(), r, q.nodes_used};
  if (!q.converged)
    throw ConvergenceError("psi_integral: no convergence to tol " + std::to_string(o.tol) + " within the node budget");
  if (std::abs(out.imag) > std::max(o.tol, 10.0 * out.error_estimate))
    throw ConsistencyError("psi_integral: imaginary part " + std::to_string(out.imag) + " is not negligible");
  return out;
}

struct MomentResult {
  double value = 0.0;
  double error_estimate = 0.0;
  std::vector<double> psi;  // the subtracted integrals, j = 1..N-1
};

/// E(x_1(t)) = (p - q) t + y_1 - sum_{j=1}^{N-1} \oint psi_j(xi; y_{j+1}-y_1, ..., y_{j+1}-y_j).
inline MomentResult expected_first_particle(const Configuration& Y, double t, const ModelParams& mp,
                                            const MomentOptions& o = {}) {
  if (!(mp.p() > 0.0)) throw DomainError("expected_first_particle requires p > 0");
  if (!(t >= 0.0) || !std::isfinite(t)) throw DomainError("t must be finite and nonnegative");
  MomentResult out;
  NeumaierSum v, e;
  v += (mp.p() - mp.q()) * t;
  v += static_cast<double>(Y[0]);
  for (std::size_t j = 1; j < Y.size(); ++j) {
    std::vector<long long> z(j);
    for (std::size_t i = 0; i < j; ++i) z[i] = Y[j] - Y[i];
    const auto r = psi_integral(static_cast<int>(j), z, t, mp, o);
    out.psi.push_back(r.value);
    v += -r.value;
    e += r.error_estimate;
  }
  out.value = v.value();
  out.error_estimate = e.value();
  return out;
}

}  // namespace asep
