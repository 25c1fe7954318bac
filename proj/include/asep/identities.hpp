#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "asep/core.hpp"
#include "asep/errors.hpp"
#include "asep/kernel.hpp"

namespace asep {

struct IdentityReport {
  std::string name;
  int n = 0;
  int m = -1;  // -1 when the identity has no subset size
  ModelParams params{0.5, 0.5};
  std::uint64_t seed = 0;
  int samples = 0;
  int resampled = 0;            // draws rejected for sitting within the pole margin
  double max_rel_error = 0.0;   // over samples (and over routes when there are two)
  double route_agreement = 0.0;  // max relative gap between the two routes, if any
  double tol = 1e-9;
  bool passed = false;
};

struct IdentityOptions {
  int samples = 30;
  std::uint64_t seed = 20240601;
  double tol = 1e-9;
  // Moduli are drawn from [band_lo, band_hi] times a per-identity scale; see
  // natural_scale. Set scale_override > 0 to pin the scale.
  double band_lo = 1.0 / 6.0, band_hi = 1.0;
  double scale_override = 0.0;
  double pole_margin = 1e-3;
};

enum class IdentityKind { perm, perm_dual, subset, bethe };

/// Sampling scale where each identity's terms are of the size of its right side.
/// The permutation sum carries prod (p + q xi_i xi_j - xi_i) against p^{N(N-1)/2},
/// so |xi| well below p; the dual one is its image under xi -> 1/xi, p <-> q;
/// the subset sums balance near |xi| ~ 1/q.
inline double natural_scale(IdentityKind k, const ModelParams& mp) {
  const double p = std::max(mp.p(), 1e-3), q = std::max(mp.q(), 1e-2);
  switch (k) {
    case IdentityKind::perm: return p / 6.0;
    case IdentityKind::perm_dual: return 36.0 / q;
    case IdentityKind::subset: return 1.0 / q;
    case IdentityKind::bethe: return 0.6;
  }
  return 1.0;
}

namespace detail {

inline double rel_err(cplx a, cplx b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

/// Seeded complex samples with |xi_i| in [r_min, r_max]; a vector is redrawn
/// while any denominator the identities use is within the margin of zero.
class IdentitySampler {
 public:
  IdentitySampler(int n, const ModelParams& mp, const IdentityOptions& o, double scale)
      : n_(n), mp_(mp), o_(o), scale_(scale), rng_(o.seed ^ (0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(n + 1))) {}

  std::vector<cplx> draw(int& rejected) {
    std::uniform_real_distribution<double> rad(o_.band_lo * scale_, o_.band_hi * scale_), ang(0.0, 2.0 * std::numbers::pi);
    for (int attempt = 0; attempt < 100000; ++attempt) {
      std::vector<cplx> xi(static_cast<std::size_t>(n_));
      for (auto& z : xi) z = std::polar(rad(rng_), ang(rng_));
      if (admissible(xi)) return xi;
      ++rejected;
    }
    throw EvaluationError("identity sampler could not avoid the poles");
  }

 private:
  bool admissible(const std::vector<cplx>& xi) const {
    const double eps = o_.pole_margin;
    for (std::size_t i = 0; i < xi.size(); ++i) {
      if (std::abs(1.0 - xi[i]) < eps) return false;
      for (std::size_t j = 0; j < xi.size(); ++j) {
        if (i == j) continue;
        if (std::abs(xi[j] - xi[i]) < eps) return false;
        if (std::abs(pair_factor(xi[i], xi[j], mp_)) < eps) return false;
        if (std::abs(pair_factor(xi[i], xi[j], mp_.swapped())) < eps) return false;
      }
    }
    // partial products appearing in the telescoping chains, any order
    const std::size_t n = xi.size();
    if (n <= 12)
      for (std::uint64_t mask = 1; mask < (1ULL << n); ++mask) {
        cplx pr = 1.0;
        for (std::size_t i = 0; i < n; ++i)
          if (mask >> i & 1U) pr *= xi[i];
        if (std::abs(1.0 - pr) < eps) return false;
      }
    return true;
  }

  int n_;
  ModelParams mp_;
  IdentityOptions o_;
  double scale_;
  std::mt19937_64 rng_;
};

/// Sum over sigma of sgn sigma prod_{i<j}(p + q xi_s(i) xi_s(j) - xi_s(i))
///   * xi_s(2) xi_s(3)^2 ... xi_s(N)^{N-1} / prod_k (1 - xi_s(k) ... xi_s(N)).
inline cplx perm_identity_lhs(std::span<const cplx> xi, const ModelParams& mp) {
  const int n = static_cast<int>(xi.size());
  cplx total = 0.0;
  for_each_permutation(n, [&](const Permutation& s, int sign) {
    cplx v = static_cast<double>(sign);
    for (int i = 1; i <= n; ++i) {
      const cplx a = xi[static_cast<std::size_t>(s(i) - 1)];
      for (int j = i + 1; j <= n; ++j) v *= pair_factor(a, xi[static_cast<std::size_t>(s(j) - 1)], mp);
      v *= cpow_int(a, i - 1);
    }
    cplx tail = 1.0;
    for (int k = n; k >= 1; --k) {
      tail *= xi[static_cast<std::size_t>(s(k) - 1)];
      v /= 1.0 - tail;
    }
    total += v;
  });
  return total;
}

/// p^{N(N-1)/2} prod_{i<j}(xi_j - xi_i) / prod_j (1 - xi_j).
inline cplx perm_identity_rhs(std::span<const cplx> xi, const ModelParams& mp) {
  const std::size_t n = xi.size();
  cplx v = ipow(mp.p(), static_cast<long long>(n * (n - 1) / 2));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) v *= xi[j] - xi[i];
    v /= 1.0 - xi[i];
  }
  return v;
}

/// Sum over sigma of sgn sigma prod_{i<j}(p + q xi_s(i) xi_s(j) - xi_s(i))
///   / prod_k (xi_s(1) ... xi_s(k) - 1).
inline cplx perm_identity_dual_lhs(std::span<const cplx> xi, const ModelParams& mp) {
  const int n = static_cast<int>(xi.size());
  cplx total = 0.0;
  for_each_permutation(n, [&](const Permutation& s, int sign) {
    cplx v = static_cast<double>(sign), head = 1.0;
    for (int i = 1; i <= n; ++i) {
      const cplx a = xi[static_cast<std::size_t>(s(i) - 1)];
      for (int j = i + 1; j <= n; ++j) v *= pair_factor(a, xi[static_cast<std::size_t>(s(j) - 1)], mp);
      head *= a;
      v /= head - 1.0;
    }
    total += v;
  });
  return total;
}

/// q^{N(N-1)/2} prod_{i<j}(xi_j - xi_i) / prod_j (xi_j - 1).
inline cplx perm_identity_dual_rhs(std::span<const cplx> xi, const ModelParams& mp) {
  const std::size_t n = xi.size();
  cplx v = ipow(mp.q(), static_cast<long long>(n * (n - 1) / 2));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) v *= xi[j] - xi[i];
    v /= xi[i] - 1.0;
  }
  return v;
}

/// The dual left side through the first identity: with eta_i = 1/xi_{N+1-i}
/// and p, q swapped, LHS'(xi) = (xi_1 ... xi_N)^{N-2} LHS(eta).
inline cplx perm_identity_dual_via_transform(std::span<const cplx> xi, const ModelParams& mp) {
  const std::size_t n = xi.size();
  std::vector<cplx> eta(n);
  cplx prod = 1.0;
  for (std::size_t i = 0; i < n; ++i) {
    eta[i] = 1.0 / xi[n - 1 - i];
    prod *= xi[i];
  }
  return cpow_int(prod, static_cast<long long>(n) - 2) * perm_identity_lhs(eta, mp.swapped());
}

/// prod_{i in S, j in S^c} (p + q xi_i xi_j - xi_i)/(xi_j - xi_i).
inline cplx cross_product(std::span<const cplx> xi, std::uint64_t mask, const ModelParams& mp) {
  cplx v = 1.0;
  for (std::size_t i = 0; i < xi.size(); ++i) {
    if (!(mask >> i & 1U)) continue;
    for (std::size_t j = 0; j < xi.size(); ++j)
      if (!(mask >> j & 1U)) v *= pair_factor(xi[i], xi[j], mp) / (xi[j] - xi[i]);
  }
  return v;
}

template <class F>
void for_each_mask_of_size(int n, int m, F&& visit) {
  for (std::uint64_t mask = 0; mask < (1ULL << n); ++mask)
    if (std::popcount(mask) == m) visit(mask);
}

template <class Eval>
IdentityReport run_samples(IdentityReport rep, IdentityKind kind, const ModelParams& mp, const IdentityOptions& o,
                           Eval&& eval) {
  IdentitySampler sampler(rep.n, mp, o, o.scale_override > 0.0 ? o.scale_override : natural_scale(kind, mp));
  rep.params = mp;
  rep.seed = o.seed;
  rep.tol = o.tol;
  for (int k = 0; k < o.samples; ++k) {
    const auto xi = sampler.draw(rep.resampled);
    eval(std::span<const cplx>(xi), rep);
    ++rep.samples;
  }
  rep.passed = rep.max_rel_error < o.tol;
  return rep;
}

}  // namespace detail

/// sum_sigma sgn sigma prod_{i<j}(p + q xi_s(i) xi_s(j) - xi_s(i)) xi_s(2) xi_s(3)^2 ... /
///   (1 - xi_s(1)...xi_s(N)) ... (1 - xi_s(N)) = p^{N(N-1)/2} prod_{i<j}(xi_j - xi_i)/prod(1 - xi_j).
inline IdentityReport check_perm_identity(int n, const ModelParams& mp, const IdentityOptions& o = {}) {
  if (n < 1 || n > 7) throw DomainError("check_perm_identity supports 1 <= N <= 7");
  IdentityReport rep;
  rep.name = "perm_identity";
  rep.n = n;
  return detail::run_samples(rep, IdentityKind::perm, mp, o, [&](std::span<const cplx> xi, IdentityReport& r) {
    r.max_rel_error =
        std::max(r.max_rel_error, detail::rel_err(detail::perm_identity_lhs(xi, mp), detail::perm_identity_rhs(xi, mp)));
  });
}

/// The (xi_s(1) - 1)(xi_s(1) xi_s(2) - 1)... version with right side
/// q^{N(N-1)/2} prod_{i<j}(xi_j - xi_i)/prod(xi_j - 1), evaluated directly and
/// through the first identity at eta_i = 1/xi_{N+1-i} with p and q swapped.
inline IdentityReport check_perm_identity_dual(int n, const ModelParams& mp, const IdentityOptions& o = {}) {
  if (n < 1 || n > 7) throw DomainError("check_perm_identity_dual supports 1 <= N <= 7");
  IdentityReport rep;
  rep.name = "perm_identity_dual";
  rep.n = n;
  return detail::run_samples(rep, IdentityKind::perm_dual, mp, o, [&](std::span<const cplx> xi, IdentityReport& r) {
    const cplx direct = detail::perm_identity_dual_lhs(xi, mp);
    const cplx via = detail::perm_identity_dual_via_transform(xi, mp);
    const cplx rhs = detail::perm_identity_dual_rhs(xi, mp);
    r.max_rel_error = std::max({r.max_rel_error, detail::rel_err(direct, rhs), detail::rel_err(via, rhs)});
    r.route_agreement = std::max(r.route_agreement, detail::rel_err(direct, via));
  });
}

/// sum_{|S|=m} prod_{i in S, j in S^c} (p + q xi_i xi_j - xi_i)/(xi_j - xi_i) (1 - prod_{j in S^c} xi_j)
///   = q^m [N-1 over m] (1 - prod_j xi_j),  N >= m + 1.
inline IdentityReport check_subset_identity(int n, int m, const ModelParams& mp, const IdentityOptions& o = {}) {
  if (m < 0 || n < m + 1 || n > 20) throw DomainError("check_subset_identity requires 0 <= m < N <= 20");
  IdentityReport rep;
  rep.name = "subset_identity";
  rep.n = n;
  rep.m = m;
  const double c = ipow(mp.q(), m) * qbracket_binom(n - 1, m, mp);
  return detail::run_samples(rep, IdentityKind::subset, mp, o, [&](std::span<const cplx> xi, IdentityReport& r) {
    cplx lhs = 0.0, all = 1.0;
    for (cplx z : xi) all *= z;
    detail::for_each_mask_of_size(n, m, [&](std::uint64_t mask) {
      cplx rest = 1.0;
      for (int j = 0; j < n; ++j)
        if (!(mask >> j & 1U)) rest *= xi[static_cast<std::size_t>(j)];
      lhs += detail::cross_product(xi, mask, mp) * (1.0 - rest);
    });
    r.max_rel_error = std::max(r.max_rel_error, detail::rel_err(lhs, c * (1.0 - all)));
  });
}

/// sum_{|S|=m} prod_{i in S, j in S^c} (p + q xi_i xi_j - xi_i)/(xi_j - xi_i) = [N over m].
/// The left side is constant in xi; route_agreement records the spread across samples.
inline IdentityReport check_simple_subset_identity(int n, int m, const ModelParams& mp, const IdentityOptions& o = {}) {
  if (m < 0 || m > n || n > 20) throw DomainError("check_simple_subset_identity requires 0 <= m <= N <= 20");
  IdentityReport rep;
  rep.name = "simple_subset_identity";
  rep.n = n;
  rep.m = m;
  const double c = qbracket_binom(n, m, mp);
  std::vector<cplx> seen;
  return detail::run_samples(rep, IdentityKind::subset, mp, o, [&](std::span<const cplx> xi, IdentityReport& r) {
    cplx lhs = 0.0;
    detail::for_each_mask_of_size(n, m, [&](std::uint64_t mask) { lhs += detail::cross_product(xi, mask, mp); });
    r.max_rel_error = std::max(r.max_rel_error, detail::rel_err(lhs, c));
    if (!seen.empty()) r.route_agreement = std::max(r.route_agreement, detail::rel_err(lhs, seen.front()));
    seen.push_back(lhs);
  });
}

/// [N over m] = p^m [N-1 over m] + q^{N-m} [N-1 over m-1] for 1 <= m < N <= N_max.
inline IdentityReport check_bracket_recursion(int n_max, const ModelParams& mp, double tol = 1e-9) {
  if (n_max < 1 || n_max > 60) throw DomainError("check_bracket_recursion supports 1 <= N_max <= 60");
  IdentityReport rep;
  rep.name = "bracket_recursion";
  rep.n = n_max;
  rep.params = mp;
  rep.tol = tol;
  for (int n = 2; n <= n_max; ++n)
    for (int m = 1; m < n; ++m) {
      const double lhs = qbracket_binom(n, m, mp);
      const double rhs = ipow(mp.p(), m) * qbracket_binom(n - 1, m, mp) + ipow(mp.q(), n - m) * qbracket_binom(n - 1, m - 1, mp);
      rep.max_rel_error = std::max(rep.max_rel_error, std::abs(lhs - rhs) / std::abs(lhs));
      ++rep.samples;
    }
  rep.passed = rep.max_rel_error < tol;
  return rep;
}

/// A_{T_i sigma} = S_{sigma(i+1), sigma(i)} A_sigma for every sigma in S_N and
/// every adjacent transposition.
inline IdentityReport check_bethe_boundary(int n, const ModelParams& mp, IdentityOptions o = {}) {
  if (n < 2 || n > 7) throw DomainError("check_bethe_boundary supports 2 <= N <= 7");
  IdentityReport rep;
  rep.name = "bethe_boundary";
  rep.n = n;
  return detail::run_samples(rep, IdentityKind::bethe, mp, o, [&](std::span<const cplx> xi, IdentityReport& r) {
    for_each_permutation(n, [&](const Permutation& s, int) {
      const cplx a = bethe_amplitude(s, xi, mp);
      for (int i = 1; i < n; ++i) {
        const cplx lhs = bethe_amplitude(s.transposed(i), xi, mp);
        const cplx rhs = s_factor(xi[static_cast<std::size_t>(s(i + 1) - 1)], xi[static_cast<std::size_t>(s(i) - 1)], mp) * a;
        r.max_rel_error = std::max(r.max_rel_error, detail::rel_err(lhs, rhs));
      }
    });
  });
}

}  // namespace asep
