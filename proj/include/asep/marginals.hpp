#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "asep/core.hpp"
#include "asep/errors.hpp"
#include "asep/kernel.hpp"
#include "asep/quadrature.hpp"
#include "asep/summation.hpp"

namespace asep {

/// Which particle, where, when, from where.
struct MarginalQuery {
  Configuration Y;
  int m = 1;
  Site x = 0;
  double t = 0.0;
  ModelParams params{0.5, 0.5};

  void validate() const {
    if (m < 1 || m > static_cast<int>(Y.size()))
      throw DomainError("particle index m must lie in 1..N (got " + std::to_string(m) + ")");
    if (!(t >= 0.0) || !std::isfinite(t)) throw DomainError("t must be finite and nonnegative");
  }
};

struct MarginalOptions {
  double tol = 1e-10;
  double small_safety = 0.5;            // C_r radius factor
  double large_safety = 0.6;            // C_R = enclosing radius / large_safety
  std::optional<double> radius_override;  // replaces whichever radius the formula uses
  QuadOptions quad{};
};

/// Truncation policy for the infinite sums.
struct SeriesControl {
  double tol = 1e-8;
  int max_sigma = 24;  // cutoff on sigma(S), or on k for the step series
  // Series integrals are solved to a share of tol scaled by 1/|coefficient|.
  std::optional<double> R_override;
  QuadOptions quad{};
};

struct MarginalResult {
  double value = 0.0;
  double error_estimate = 0.0;  // sum of |coefficient| * (ladder + roundoff)
  double imag = 0.0;
  int terms = 0;
  int nodes_used = 0;
  double radius = 0.0;
  bool converged = true;
  double truncation_bound = 0.0;     // series only: reported tail bound
  double truncation_estimate = 0.0;  // series only: size of the last shell
  int sigma_reached = 0;             // series only
  Route route = Route::direct;
  double surrogate_bound = 0.0;      // series only: sum_{k > cutoff} 2^k R^{-k/2}
};

namespace detail {

inline QuadOptions with_tol(QuadOptions q, double tol) {
  q.tol = tol;
  return q;
}

/// I(x, Y_S, xi) (or its CDF variant) evaluated at a fixed anchor site.
struct IntegrandIS {
  std::vector<long long> e;
  double t;
  ModelParams mp;
  bool cdf = false;  // numerator 1 instead of (1 - prod xi)

  IntegrandIS(const Configuration& Y, const IndexSet& S, Site x, double t_, const ModelParams& mp_, bool cdf_ = false)
      : t(t_), mp(mp_), cdf(cdf_) {
    for (int i : S) e.push_back(x - Y.at1(i) - 1);
  }
  cplx operator()(std::span<const cplx> xi) const {
    cplx prod = 1.0, den = 1.0;
    for (cplx z : xi) {
      prod *= z;
      den *= 1.0 - z;
    }
    const cplx num = cdf ? cplx(1.0) : 1.0 - prod;
    return vandermonde_ratio(xi, mp) * num / checked(den, "prod(1 - xi_i)") * power_exp_factor(xi, e, t, mp);
  }
};

/// Anchor near the middle of Y_S so sampled values stay near unit scale.
inline Site anchor_for(const Configuration& Y, const IndexSet& S) {
  long long s = 0;
  for (int i : S) s += Y.at1(i);
  return S.empty() ? 0 : static_cast<Site>(std::llround(static_cast<double>(s) / S.size())) + 1;
}

inline std::string mask_key(const IndexSet& s) {
  std::string k;
  for (int i : s) k += std::to_string(i) + ",";
  return k;
}

}  // namespace detail

/// Coefficient of \oint_{C_R} I(x, Y_S) in the large-contour m-th particle
/// formula, global factor included:
///   (-1)^{m+1} (pq)^{m(m-1)/2} [|S|-1 over |S|-m] p^{sigma(S)-m|S|} / q^{sigma(S)-|S|(|S|+1)/2}.
inline double large_contour_coefficient(long long sigma, int k, int m, const ModelParams& mp) {
  if (k < m) return 0.0;
  const long long mm = static_cast<long long>(m) * (m - 1) / 2;
  const long long pe = sigma - static_cast<long long>(m) * k + mm;  // >= 0
  const long long qe = mm - (sigma - static_cast<long long>(k) * (k + 1) / 2);
  const double sign = (m + 1) % 2 ? -1.0 : 1.0;
  return sign * qbracket_binom(k - 1, k - m, mp) * ipow(mp.p(), pe) * ipow(mp.q(), qe);
}

/// Evaluates the finite-N marginal formulas for one (Y, t, p) at many sites,
/// sharing every contour integral between sites and between formulas.
class MarginalEngine {
 public:
  MarginalEngine(Configuration Y, double t, ModelParams mp, MarginalOptions o = {})
      : Y_(std::move(Y)), t_(t), mp_(mp), o_(o) {
    if (!(t >= 0.0) || !std::isfinite(t)) throw DomainError("t must be finite and nonnegative");
  }

  const Configuration& Y() const noexcept { return Y_; }
  int n() const noexcept { return static_cast<int>(Y_.size()); }
  double small_r() const { return o_.radius_override ? *o_.radius_override : small_radius(mp_, o_.small_safety); }
  double large_r() const { return o_.radius_override ? *o_.radius_override : enclosing_radius(mp_, o_.large_safety); }

  /// p^{N(N-1)/2} \oint_{C_r} I(x, Y, xi).
  std::vector<MarginalResult> first_small(std::span<const Site> xs) {
    return finalize(first_small_raw(xs), "first_particle_small");
  }
  std::vector<MarginalResult> first_small_raw(std::span<const Site> xs) {
    need_p();
    const int N = n();
    std::vector<Term> terms{{1.0, &fam_I(IndexSet::full(N), false, false)}};
    return combine(terms, xs, ipow(mp_.p(), N * (N - 1) / 2), 0.0, "first_particle_small");
  }

  /// Sum over nonempty S of p^{sigma(S)-|S|} / q^{sigma(S)-|S|(|S|+1)/2} \oint_{C_R} I(x, Y_S, xi).
  std::vector<MarginalResult> first_large(std::span<const Site> xs) {
    return finalize(first_large_raw(xs), "first_particle_large");
  }
  std::vector<MarginalResult> first_large_raw(std::span<const Site> xs) {
    need_q();
    std::vector<Term> terms;
    for_each_subset(n(), [&](const IndexSet& s) {
      if (s.empty()) return;
      terms.push_back({first_large_coef(s), &fam_I(s, true, false)});
    });
    return combine(terms, xs, 1.0, 0.0, "first_particle_large");
  }

  /// Q(x) = P(x_1(t) >= x); see first_particle_cdf.
  std::vector<MarginalResult> cdf(std::span<const Site> xs, bool large) {
    return finalize(cdf_raw(xs, large), "first_particle_cdf");
  }
  std::vector<MarginalResult> cdf_raw(std::span<const Site> xs, bool large) {
    need_p();
    const int N = n();
    if (!large) {
      std::vector<Term> terms{{1.0, &fam_I(IndexSet::full(N), false, true)}};
      return combine(terms, xs, ipow(mp_.p(), N * (N - 1) / 2), 0.0, "first_particle_cdf");
    }
    need_q();
    std::vector<Term> terms;
    for_each_subset(N, [&](const IndexSet& s) {
      if (s.empty()) return;
      terms.push_back({first_large_coef(s), &fam_I(s, true, true)});
    });
    return combine(terms, xs, 1.0, 1.0, "first_particle_cdf");
  }

  /// -q [N-1] p^{(N-1)(N-2)/2} \oint I(x,Y) + p^{(N-1)(N-2)/2} sum_k (q/p)^{k-1} \oint I(x, Y \ {y_k}).
  std::vector<MarginalResult> second(std::span<const Site> xs) {
    return finalize(second_raw(xs), "second_particle");
  }
  std::vector<MarginalResult> second_raw(std::span<const Site> xs) {
    need_p();
    const int N = n();
    if (N < 2) throw DomainError("second_particle requires N >= 2");
    const double p = mp_.p(), q = mp_.q();
    std::vector<Term> terms{{-q * qbracket(N - 1, mp_), &fam_I(IndexSet::full(N), false, false)}};
    for (int k = 1; k <= N; ++k)
      terms.push_back({ipow(q, k - 1) * ipow(p, -(k - 1)), &fam_I(IndexSet({k}, N).complement(), false, false)});
    return combine(terms, xs, ipow(p, (N - 1) * (N - 2) / 2), 0.0, "second_particle");
  }

  /// Sum over |S^c| < m of
  ///   (-1)^{m-1-|S^c|} [|S|-1 over m-|S^c|-1] q^{sigma(S^c)-m|S^c|} / p^{sigma(S^c)-|S^c|(|S^c|+1)/2} \oint_{C_r} I(x, Y_S),
  /// times p^{(N-m)(N-m+1)/2} q^{m(m-1)/2}.
  std::vector<MarginalResult> mth_small_raw(int m, std::span<const Site> xs) {
    need_p();
    need_m(m);
    const int N = n();
    const double p = mp_.p(), q = mp_.q();
    std::vector<Term> terms;
    for_each_subset(N, [&](const IndexSet& s) {
      const IndexSet sc = s.complement();
      const long long c = sc.size();
      if (c >= m) return;
      const long long sg = sigma_sum(sc);
      // q power merged with the global q^{m(m-1)/2}; it is nonnegative, so q = 0 is safe.
      const long long qe = sg - m * c + static_cast<long long>(m) * (m - 1) / 2;
      const double sign = ((m - 1 - c) % 2) ? -1.0 : 1.0;
      const double coef = sign * qbracket_binom(s.size() - 1, static_cast<int>(m - c - 1), mp_) * ipow(q, qe) *
                          ipow(p, -(sg - c * (c + 1) / 2));
      terms.push_back({coef, &fam_I(s, false, false)});
    });
    return combine(terms, xs, ipow(p, (N - m) * (N - m + 1) / 2), 0.0, "mth_particle_small");
  }

  /// Sum over |S| >= m of large_contour_coefficient * \oint_{C_R} I(x, Y_S).
  std::vector<MarginalResult> mth_large_raw(int m, std::span<const Site> xs) {
    need_q();
    need_m(m);
    std::vector<Term> terms;
    for_each_subset(n(), [&](const IndexSet& s) {
      if (s.size() < m) return;
      terms.push_back({large_contour_coefficient(sigma_sum(s), s.size(), m, mp_), &fam_I(s, true, false)});
    });
    return combine(terms, xs, 1.0, 0.0, "mth_particle_large");
  }

  /// Sum over |U| = m-1, T subset of U, D = U \ T, of
  ///   sgn U (-1)^{|T| + sigma(D) - sigma(D,U)} q^{sigma(D)-(m-1)|D|} / p^{sigma(D)+|T|(m+|D|)/2} \oint_{C_r} I(x, Y_{T,U^c}),
  /// times p^{(N-m)(N-m+1)/2 + m(m-1)/2} q^{(m-1)(m-2)/2}.
  std::vector<MarginalResult> mth_tu_raw(int m, std::span<const Site> xs) {
    const double p = mp_.p(), q = mp_.q();
    if (!(p > 0.0 && q > 0.0)) throw DomainError("mth_particle_TU requires p > 0 and q > 0");
    need_m(m);
    const int N = n();
    std::vector<Term> terms;
    for_each_subset_of_size(N, m - 1, [&](const IndexSet& u) {
      const IndexSet uc = u.complement();
      const int sgn_u = sign_of_set(u);
      const auto um = u.members();
      for (std::uint64_t mask = 0; mask < (1ULL << um.size()); ++mask) {
        std::vector<int> tm, dm;
        for (std::size_t i = 0; i < um.size(); ++i) (mask >> i & 1U ? tm : dm).push_back(um[i]);
        const IndexSet T(tm, N), D(dm, N);
        const long long sd = sigma_sum(D), nt = T.size(), nd = D.size();
        const long long e = nt + sd - sigma_positions(D, u);
        const double coef = sgn_u * ((e % 2) ? -1.0 : 1.0) * ipow(q, sd - (m - 1) * nd) * ipow(p, -(sd + nt * (m + nd) / 2));
        terms.push_back({coef, &fam_TU(T, uc)});
      }
    });
    const long long pe = static_cast<long long>(N - m) * (N - m + 1) / 2 + static_cast<long long>(m) * (m - 1) / 2;
    return combine(terms, xs, ipow(p, pe) * ipow(q, static_cast<long long>(m - 1) * (m - 2) / 2), 0.0,
                   "mth_particle_TU");
  }

  /// m-th particle formulas with direct/dual routing per site.
  std::vector<MarginalResult> mth_small(int m, std::span<const Site> xs, Route r = Route::automatic) {
    return routed(m, xs, r, &MarginalEngine::mth_small_raw, "mth_particle_small");
  }
  std::vector<MarginalResult> mth_large(int m, std::span<const Site> xs, Route r = Route::automatic) {
    return routed(m, xs, r, &MarginalEngine::mth_large_raw, "mth_particle_large");
  }
  std::vector<MarginalResult> mth_tu(int m, std::span<const Site> xs, Route r = Route::automatic) {
    return routed(m, xs, r, &MarginalEngine::mth_tu_raw, "mth_particle_TU");
  }

  /// The engine for the reflected system with p and q swapped.
  MarginalEngine& dual() {
    if (!dual_) dual_ = std::make_unique<MarginalEngine>(Y_.reflected(), t_, mp_.swapped(), o_);
    return *dual_;
  }

 private:
  using Raw = std::vector<MarginalResult> (MarginalEngine::*)(int, std::span<const Site>);

  bool acceptable(const MarginalResult& r) const {
    return r.converged && std::abs(r.imag) <= std::max(o_.tol, 10.0 * r.error_estimate);
  }

  std::vector<MarginalResult> finalize(std::vector<MarginalResult> v, const char* what) const {
    for (const auto& r : v) {
      if (!r.converged)
        throw ConvergenceError(std::string(what) + ": a term integral did not reach tol " + std::to_string(o_.tol) +
                               " within the node budget");
      const double floor = std::max(o_.tol, 10.0 * r.error_estimate);
      if (std::abs(r.imag) > floor)
        throw ConsistencyError(std::string(what) + ": imaginary part " + std::to_string(r.imag) +
                               " exceeds tolerance " + std::to_string(floor));
    }
    return v;
  }

  std::vector<MarginalResult> routed(int m, std::span<const Site> xs, Route r, Raw f, const char* what) {
    need_m(m);
    std::vector<Site> nx(xs.begin(), xs.end());
    for (auto& x : nx) x = -x;
    const int md = n() - m + 1;
    auto run_dual = [&] {
      auto v = (dual().*f)(md, nx);
      for (auto& x : v) x.route = Route::dual;
      return v;
    };
    if (r == Route::direct) return finalize((this->*f)(m, xs), what);
    if (r == Route::dual) return finalize(run_dual(), what);
    std::optional<std::vector<MarginalResult>> a, b;
    try {
      a = (this->*f)(m, xs);
    } catch (const DomainError&) {
    }
    try {
      b = run_dual();
    } catch (const DomainError&) {
      if (!a) throw;
    }
    if (!a) return finalize(*b, what);
    if (!b) return finalize(*a, what);
    std::vector<MarginalResult> out;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      const auto& u = (*a)[i];
      const auto& w = (*b)[i];
      const bool ok_u = acceptable(u), ok_w = acceptable(w);
      if (ok_u != ok_w)
        out.push_back(ok_u ? u : w);
      else
        out.push_back(u.error_estimate <= w.error_estimate ? u : w);
    }
    return finalize(std::move(out), what);
  }

  struct Term {
    double coef;
    PowerFamily* fam;
  };

  void need_p() const {
    if (!(mp_.p() > 0.0)) throw DomainError("small-contour formulas require p > 0");
  }
  void need_q() const {
    if (!(mp_.q() > 0.0)) throw DomainError("large-contour formulas require q > 0");
  }
  void need_m(int m) const {
    if (m < 1 || m > n()) throw DomainError("particle index m must lie in 1..N (got " + std::to_string(m) + ")");
  }
  double first_large_coef(const IndexSet& s) const {
    const long long sg = sigma_sum(s), k = s.size();
    return ipow(mp_.p(), sg - k) * ipow(mp_.q(), -(sg - k * (k + 1) / 2));
  }

  PowerFamily& fam_I(const IndexSet& s, bool large, bool cdf) {
    const std::string key = std::string(large ? "L" : "S") + (cdf ? "Q:" : "I:") + detail::mask_key(s);
    auto it = cache_.find(key);
    if (it != cache_.end()) return *it->second;
    const Site anchor = detail::anchor_for(Y_, s);
    detail::IntegrandIS g(Y_, s, anchor, t_, mp_, cdf);
    auto fam = std::make_unique<PowerFamily>(g, s.size(), large ? large_r() : small_r(), false,
                                             detail::with_tol(o_.quad, o_.tol), anchor);
    return *cache_.emplace(key, std::move(fam)).first->second;
  }

  PowerFamily& fam_TU(const IndexSet& T, const IndexSet& U) {
    const std::string key = "TU:" + detail::mask_key(T) + "|" + detail::mask_key(U);
    auto it = cache_.find(key);
    if (it != cache_.end()) return *it->second;
    const IndexSet all = T.set_union(U);
    const Site anchor = detail::anchor_for(Y_, all);
    const IntegrandParams ip{anchor, Y_, t_, mp_};
    auto g = [T, U, ip](std::span<const cplx> xi) { return integrand_I_TU(T, U, ip, xi); };
    auto fam = std::make_unique<PowerFamily>(g, all.size(), small_r(), false, detail::with_tol(o_.quad, o_.tol), anchor);
    return *cache_.emplace(key, std::move(fam)).first->second;
  }

  std::vector<MarginalResult> combine(const std::vector<Term>& terms, std::span<const Site> xs, double prefactor,
                                      double constant, const char*) {
    std::vector<MarginalResult> out;
    out.reserve(xs.size());
    for (Site x : xs) {
      ComplexSum sum;
      NeumaierSum err;
      sum += cplx(constant, 0.0);
      MarginalResult r;
      for (const auto& term : terms) {
        if (term.coef == 0.0) continue;
        const auto v = term.fam->eval(x);
        sum += term.coef * v.value;
        err += std::abs(term.coef) * (v.ladder + v.roundoff);
        r.nodes_used = std::max(r.nodes_used, v.nodes);
        r.converged = r.converged && v.converged;
        r.radius = term.fam->radius();
        ++r.terms;
      }
      const cplx v = prefactor * sum.value();
      r.value = v.real();
      r.imag = v.imag();
      r.error_estimate = std::abs(prefactor) * err.value();
      out.push_back(r);
    }
    return out;
  }

  Configuration Y_;
  double t_;
  ModelParams mp_;
  MarginalOptions o_;
  std::map<std::string, std::unique_ptr<PowerFamily>> cache_;
  std::unique_ptr<MarginalEngine> dual_;
};

namespace detail {
inline MarginalResult single(std::vector<MarginalResult> v) { return v.front(); }
}  // namespace detail

/// P(x_1(t) = x) on small contours.
inline MarginalResult first_particle_small(const MarginalQuery& mq, const MarginalOptions& o = {}) {
  mq.validate();
  if (mq.m != 1) throw DomainError("first_particle_small is for m = 1");
  const Site x[] = {mq.x};
  return detail::single(MarginalEngine(mq.Y, mq.t, mq.params, o).first_small(x));
}

/// P(x_1(t) = x) on large contours, summed over nonempty S.
inline MarginalResult first_particle_large(const MarginalQuery& mq, const MarginalOptions& o = {}) {
  mq.validate();
  if (mq.m != 1) throw DomainError("first_particle_large is for m = 1");
  const Site x[] = {mq.x};
  return detail::single(MarginalEngine(mq.Y, mq.t, mq.params, o).first_large(x));
}

/// Route for Q(x): the small-contour integral, or its large-contour complement
///   1 + sum_{S nonempty} c_S \oint_{C_R} (CDF integrand on Y_S),
/// with c_S the first-particle large-contour coefficients. Automatic picks the
/// small form for x >= y_1 and the complement to the left, where it is well
/// conditioned.
enum class CdfRoute { automatic, small, large };

/// Q(x) = P(x_1(t) >= x).
inline MarginalResult first_particle_cdf(const Configuration& Y, Site x, double t, const ModelParams& mp,
                                         const MarginalOptions& o = {}, CdfRoute route = CdfRoute::automatic) {
  MarginalQuery{Y, 1, x, t, mp}.validate();
  if (!(mp.p() > 0.0)) throw DomainError("first_particle_cdf requires p > 0");
  if (route == CdfRoute::automatic) route = (x >= Y[0] || !(mp.q() > 0.0)) ? CdfRoute::small : CdfRoute::large;
  const Site xs[] = {x};
  return detail::single(MarginalEngine(Y, t, mp, o).cdf(xs, route == CdfRoute::large));
}

inline MarginalResult second_particle(const MarginalQuery& mq, const MarginalOptions& o = {}) {
  mq.validate();
  if (mq.m != 2) throw DomainError("second_particle is for m = 2");
  const Site x[] = {mq.x};
  return detail::single(MarginalEngine(mq.Y, mq.t, mq.params, o).second(x));
}

inline MarginalResult mth_particle_small(const MarginalQuery& mq, const MarginalOptions& o = {},
                                     Route route = Route::automatic) {
  mq.validate();
  const Site x[] = {mq.x};
  return detail::single(MarginalEngine(mq.Y, mq.t, mq.params, o).mth_small(mq.m, x, route));
}

inline MarginalResult mth_particle_large(const MarginalQuery& mq, const MarginalOptions& o = {},
                                     Route route = Route::automatic) {
  mq.validate();
  const Site x[] = {mq.x};
  return detail::single(MarginalEngine(mq.Y, mq.t, mq.params, o).mth_large(mq.m, x, route));
}

inline MarginalResult mth_particle_TU(const MarginalQuery& mq, const MarginalOptions& o = {},
                                     Route route = Route::automatic) {
  mq.validate();
  const Site x[] = {mq.x};
  return detail::single(MarginalEngine(mq.Y, mq.t, mq.params, o).mth_tu(mq.m, x, route));
}

// ---------------------------------------------------------------------------
// Series over subsets of Z^+ and the step initial condition.

namespace detail {

/// d[k][s]: number of sets of k distinct integers in 1..cap with sum s, s <= smax.
inline std::vector<std::vector<double>> distinct_part_counts(int smax, int kmax, long long cap) {
  std::vector<std::vector<double>> d(static_cast<std::size_t>(kmax) + 1,
                                     std::vector<double>(static_cast<std::size_t>(smax) + 1, 0.0));
  d[0][0] = 1.0;
  for (int part = 1; part <= smax && part <= cap; ++part)
    for (int k = kmax; k >= 1; --k)
      for (int s = smax; s >= part; --s)
        d[static_cast<std::size_t>(k)][static_cast<std::size_t>(s)] +=
            d[static_cast<std::size_t>(k) - 1][static_cast<std::size_t>(s - part)];
  return d;
}

/// sum over all k-subsets S of Z^+ of B^{sigma(S)} = B^{k(k+1)/2} / prod_{i<=k} (1 - B^i).
inline double log_set_gf(int k, double B) {
  double v = 0.5 * k * (k + 1) * std::log(B);
  for (int i = 1; i <= k; ++i) v -= std::log1p(-std::pow(B, i));
  return v;
}

/// log G_k, where |coefficient * integral| <= B^{sigma(S)} G_k for every
/// |S| = k term of the large-contour m-th particle sum on C_R, B = p/(qR):
///   G_k = (pq)^{m(m-1)/2} |[k-1 over k-m]| p^{-mk} q^{k(k+1)/2} V^{k(k-1)/2}
///         (1 + R^k)/(R-1)^k R^{k(x-y_1+1)} e^{k (p/R + qR - 1) t},
/// V = 2R/(qR^2 - R - p). Uses y_i >= y_1 + i - 1.
inline double log_term_majorant(int k, int m, const ModelParams& mp, double R, double x_minus_y1, double t) {
  const double p = mp.p(), q = mp.q();
  const double V = 2.0 * R / (q * R * R - R - p);
  const double mm = 0.5 * m * (m - 1);
  return mm * std::log(p * q) + std::log(std::abs(qbracket_binom(k - 1, k - m, mp))) - m * k * std::log(p) +
         0.5 * k * (k + 1) * std::log(q) + 0.5 * k * (k - 1) * std::log(V) + std::log1p(std::pow(R, k)) -
         k * std::log(R - 1.0) + k * (x_minus_y1 + 1.0) * std::log(R) + k * (p / R + q * R - 1.0) * t;
}

/// Rigorous bound on the terms with sigma(S) > K, S a subset of 1..cap with |S| >= m.
inline double sigma_tail_bound(int K, int m, const ModelParams& mp, double R, double x_minus_y1, double t,
                               long long cap) {
  const double B = mp.p() / (mp.q() * R);
  if (B == 0.0) return 0.0;
  constexpr int L = 40, kmax = 80;
  const auto d = distinct_part_counts(K + L, kmax, cap);
  NeumaierSum total;
  for (int k = m; k <= kmax; ++k) {
    if (static_cast<long long>(k) > cap) break;
    // exact count for K < s <= K + L, then B^s <= B^{(K+L+1)/2} B^{s/2} beyond
    NeumaierSum inner;
    for (int s = K + 1; s <= K + L; ++s)
      if (const double c = d[static_cast<std::size_t>(k)][static_cast<std::size_t>(s)]; c > 0.0)
        inner += c * std::pow(B, s);
    const double far = std::exp(0.5 * (K + L + 1) * std::log(B) + log_set_gf(k, std::sqrt(B)));
    const double tk = inner.value() + far;
    if (tk > 0.0) total += std::exp(log_term_majorant(k, m, mp, R, x_minus_y1, t) + std::log(tk));
  }
  return total.value();
}

/// Rigorous bound on the step series terms with k > K.
inline double k_tail_bound(int K, int m, const ModelParams& mp, double R, double x_minus_y1, double t) {
  const double B = mp.p() / (mp.q() * R);
  if (B == 0.0) return 0.0;
  NeumaierSum total;
  for (int k = std::max(K + 1, m); k <= K + 80; ++k)
    total += std::exp(log_term_majorant(k, m, mp, R, x_minus_y1, t) + log_set_gf(k, B));
  return total.value();
}

/// Geometric surrogate sum_{k > K} 2^k R^{-k/2}.
inline double surrogate_tail(int K, double R) {
  const double rho = 2.0 / std::sqrt(R);
  if (rho >= 1.0) return std::numeric_limits<double>::infinity();
  return std::pow(rho, K + 1) / (1.0 - rho);
}

/// Visits every set S of distinct integers in 1..cap with sum s and |S| >= kmin.
template <class F>
void for_each_set_with_sum(long long s, long long cap, int kmin, F&& visit) {
  std::vector<int> cur;
  auto rec = [&](auto&& self, long long rest, int lo) -> void {
    if (rest == 0) {
      if (static_cast<int>(cur.size()) >= kmin) visit(std::span<const int>(cur));
      return;
    }
    for (int v = lo; v <= rest && v <= cap; ++v) {
      // the remaining parts must fit above v
      cur.push_back(v);
      self(self, rest - v, v + 1);
      cur.pop_back();
    }
  };
  rec(rec, s, 1);
}

inline double series_radius(const ModelParams& mp, const SeriesControl& c) {
  if (!(mp.q() > 0.0)) throw DomainError("series formulas require q > 0");
  const double q = mp.q();
  const double floor = std::max(4.0, 1.0 / (q * q)) + 1.0;
  const double R = c.R_override ? *c.R_override : large_radius(mp);
  if (!(R >= floor)) throw DomainError("series radius must be at least max(4, 1/q^2) + 1 = " + std::to_string(floor));
  return R;
}

/// Shell-by-shell sum of the large-contour m-th particle formula over finite
/// S in 1..cap, where y_i extends the given positions by unit steps.
inline MarginalResult sigma_series(const Configuration& prefix, long long cap, int m, Site x, double t,
                                   const ModelParams& mp, const SeriesControl& c, const char* what) {
  if (m < 1) throw DomainError("particle index m must be >= 1");
  if (!(t >= 0.0) || !std::isfinite(t)) throw DomainError("t must be finite and nonnegative");
  const double R = series_radius(mp, c);
  const int n = static_cast<int>(prefix.size());
  const long long len = std::min<long long>(cap, std::max<long long>(n, c.max_sigma));
  if (m > len) throw DomainError("particle index m exceeds the available particles");
  std::vector<Site> ys(prefix.begin(), prefix.end());
  while (static_cast<long long>(ys.size()) < len) ys.push_back(ys.back() + 1);
  ys.resize(static_cast<std::size_t>(len));
  const Configuration Y(ys);
  const int s_min = m * (m + 1) / 2;
  if (c.max_sigma < s_min) throw DomainError("max_sigma is below the first shell m(m+1)/2");
  const double x_y1 = static_cast<double>(x - Y[0]);

  MarginalResult out;
  out.radius = R;
  ComplexSum sum;
  NeumaierSum err;
  const double share = 0.1 * c.tol / (c.max_sigma - s_min + 1);
  for (int s = s_min; s <= c.max_sigma; ++s) {
    std::vector<std::vector<int>> sets;
    for_each_set_with_sum(s, len, m, [&](std::span<const int> v) { sets.emplace_back(v.begin(), v.end()); });
    ComplexSum shell;
    for (const auto& members : sets) {
      const IndexSet S(members, static_cast<int>(len));
      const double coef = large_contour_coefficient(s, S.size(), m, mp);
      if (coef == 0.0) continue;
      QuadOptions qo = c.quad;
      qo.tol = share / (sets.size() * std::abs(coef));
      const auto r = integrate_torus(IntegrandIS(Y, S, x, t, mp), S.size(), R, qo);
      if (!r.converged)
        throw ConvergenceError(std::string(what) + ": an integral of dimension " + std::to_string(S.size()) +
                               " missed its tolerance within the node budget");
      shell += coef * r.value;
      err += std::abs(coef) * (r.error_estimate + r.roundoff());
      out.nodes_used = std::max(out.nodes_used, r.nodes_used);
      ++out.terms;
    }
    sum.merge(shell);
    out.sigma_reached = s;
    out.truncation_estimate = std::abs(shell.value());
    out.truncation_bound = sigma_tail_bound(s, m, mp, R, x_y1, t, cap);
    if (out.truncation_bound < c.tol) break;
  }
  out.surrogate_bound = surrogate_tail(out.sigma_reached, R);
  out.converged = out.truncation_bound < c.tol;
  const cplx v = sum.value();
  out.value = v.real();
  out.imag = v.imag();
  out.error_estimate = err.value();
  if (std::abs(out.imag) > std::max(c.tol, 10.0 * out.error_estimate))
    throw ConsistencyError(std::string(what) + ": imaginary part " + std::to_string(out.imag) + " is not negligible");
  return out;
}

}  // namespace detail

/// P(x_1(t) = x) for the infinite system y_i = Y_prefix[i] (i <= n), then
/// y_n + (i - n): the large-contour sum over all finite S subset of Z^+,
/// truncated at the first shell sigma(S) = K whose rigorous tail bound is
/// below ctrl.tol (or at ctrl.max_sigma, flagged non-converged).
inline MarginalResult first_particle_infinite(const Configuration& Y_prefix, Site x, double t, const ModelParams& mp,
                                              const SeriesControl& ctrl = {}) {
  return detail::sigma_series(Y_prefix, std::numeric_limits<long long>::max(), 1, x, t, mp, ctrl,
                              "first_particle_infinite");
}

/// Same series for the m-th particle.
inline MarginalResult mth_particle_infinite(const Configuration& Y_prefix, int m, Site x, double t,
                                            const ModelParams& mp, const SeriesControl& ctrl = {}) {
  return detail::sigma_series(Y_prefix, std::numeric_limits<long long>::max(), m, x, t, mp, ctrl,
                              "mth_particle_infinite");
}

/// The finite-N large-contour m-th particle sum evaluated shell by shell in
/// sigma(S), for N too large to enumerate every subset.
inline MarginalResult mth_particle_large_truncated(const Configuration& Y, int m, Site x, double t,
                                                   const ModelParams& mp, const SeriesControl& ctrl = {}) {
  return detail::sigma_series(Y, static_cast<long long>(Y.size()), m, x, t, mp, ctrl, "mth_particle_large_truncated");
}

/// Radius for the p = 0 left-edge integrals: minimizes the log size
/// (x - 2) log R + t R - m log(R - 1) of the integrand over R in [1.5, 64].
inline double tasep_radius(int m, Site x, double t) {
  auto phi = [&](double R) { return (static_cast<double>(x) - 2.0) * std::log(R) + t * R - m * std::log(R - 1.0); };
  double best = 1.5, best_phi = phi(1.5);
  for (int k = 1; k <= 600; ++k) {
    const double R = 1.5 * std::pow(64.0 / 1.5, k / 600.0);
    if (const double v = phi(R); v < best_phi) {
      best = R;
      best_phi = v;
    }
  }
  return best;
}

/// Step initial condition Y = Z^+:
///   P(x_m = x) = (-1)^{m+1} q^{m(m-1)/2} sum_{k>=m} (1/k!) [k-1 over k-m] p^{(k-m)(k-m+1)/2} q^{k(k+1)/2} \oint_{C_R} J_k,
/// stopped at the first k whose rigorous tail bound is below ctrl.tol. At p = 0
/// only k = m survives; there any R > 1 is valid and tasep_radius is used.
inline MarginalResult step_ic_mth_particle(int m, Site x, double t, const ModelParams& mp,
                                           const SeriesControl& ctrl = {}) {
  if (m < 1) throw DomainError("particle index m must be >= 1");
  if (!(t >= 0.0) || !std::isfinite(t)) throw DomainError("t must be finite and nonnegative");
  if (!(mp.q() > 0.0)) throw DomainError("step_ic_mth_particle requires q > 0");
  const double p = mp.p(), q = mp.q();
  const double R = (p == 0.0 && !ctrl.R_override) ? tasep_radius(m, x, t) : detail::series_radius(mp, ctrl);
  const double x_y1 = static_cast<double>(x - 1);
  const int k_max = std::max(m, ctrl.max_sigma);
  MarginalResult out;
  out.radius = R;
  ComplexSum sum;
  NeumaierSum err;
  const double sign = (m + 1) % 2 ? -1.0 : 1.0;
  double kfact = 1.0;
  for (int i = 2; i < m; ++i) kfact *= i;
  for (int k = m; k <= k_max; ++k) {
    kfact *= k;
    const long long pe = static_cast<long long>(k - m) * (k - m + 1) / 2;
    const long long qe = static_cast<long long>(m) * (m - 1) / 2 + static_cast<long long>(k) * (k + 1) / 2;
    const double coef = sign / kfact * qbracket_binom(k - 1, k - m, mp) * ipow(p, pe) * ipow(q, qe);
    out.sigma_reached = k;
    if (coef != 0.0) {
      QuadOptions qo = ctrl.quad;
      qo.tol = 0.1 * ctrl.tol / std::abs(coef);
      PowerFamily fam([k, t, mp](std::span<const cplx> xi) { return integrand_J(k, 0, t, mp, xi); }, k, R, true, qo,
                      0);
      const auto v = fam.eval(x);
      if (!v.converged)
        throw ConvergenceError("step_ic_mth_particle: the J_" + std::to_string(k) +
                               " integral missed its tolerance within the node budget");
      sum += coef * v.value;
      err += std::abs(coef) * (v.ladder + v.roundoff);
      out.nodes_used = std::max(out.nodes_used, v.nodes);
      out.truncation_estimate = std::abs(coef * v.value);
      ++out.terms;
    }
    out.truncation_bound = p == 0.0 ? 0.0 : detail::k_tail_bound(k, m, mp, R, x_y1, t);
    if (out.truncation_bound < ctrl.tol) break;
  }
  out.surrogate_bound = detail::surrogate_tail(out.sigma_reached, R);
  out.converged = out.truncation_bound < ctrl.tol;
  const cplx v = sum.value();
  out.value = v.real();
  out.imag = v.imag();
  out.error_estimate = err.value();
  if (std::abs(out.imag) > std::max(ctrl.tol, 10.0 * out.error_estimate))
    throw ConsistencyError("step_ic_mth_particle: imaginary part " + std::to_string(out.imag) + " is not negligible");
  return out;
}

/// p = 0, Y = Z^+:
///   P(x_m = x) = (-1)^{m(m-1)/2}/m! \oint prod_{i<j}(xi_j - xi_i)^2 (xi_1...xi_m - 1)/prod(xi_i - 1)^m
///                prod xi_i^{x-m-1} e^{(xi_i - 1) t}.
inline MarginalResult tasep_left_mth_pmf(int m, Site x, double t, const ModelParams& mp, double tol = 1e-12) {
  if (mp.p() != 0.0) throw DomainError("tasep_left_mth_pmf requires p = 0");
  if (m < 1) throw DomainError("particle index m must be >= 1");
  if (!(t >= 0.0) || !std::isfinite(t)) throw DomainError("t must be finite and nonnegative");
  const double R = tasep_radius(m, x, t);
  double mfact = 1.0;
  for (int i = 2; i <= m; ++i) mfact *= i;
  const double pref = ((m * (m - 1) / 2) % 2 ? -1.0 : 1.0) / mfact;
  auto f = [&](std::span<const cplx> xi) {
    cplx v = pref, prod = 1.0;
    for (std::size_t i = 0; i < xi.size(); ++i) {
      for (std::size_t j = i + 1; j < xi.size(); ++j) v *= (xi[j] - xi[i]) * (xi[j] - xi[i]);
      prod *= xi[i];
      v *= cpow_int(xi[i], x - m - 1) * std::exp((xi[i] - 1.0) * t) / cpow_int(xi[i] - 1.0, m);
    }
    return v * (prod - 1.0);
  };
  QuadOptions qo;
  qo.tol = tol;
  const auto r = integrate_torus_symmetric(f, m, R, qo);
  if (!r.converged) throw ConvergenceError("tasep_left_mth_pmf: no convergence within the node budget");
  MarginalResult out;
  out.value = r.value.real();
  out.imag = r.value.imag();
  out.error_estimate = r.error_estimate + r.roundoff();
  out.nodes_used = r.nodes_used;
  out.radius = R;
  out.terms = 1;
  return out;
}

/// p = 0, Y = Z^+: P(x_m(t) <= x) as the m x m Toeplitz determinant
/// det(c_{i-j+m-1}), c_n = \oint xi^{n+x-m} (xi - 1)^{-m} e^{(xi-1)t} dxi.
inline MarginalResult tasep_left_mth_cdf(int m, Site x, double t, double tol = 1e-13) {
  if (m < 1) throw DomainError("particle index m must be >= 1");
  if (!(t >= 0.0) || !std::isfinite(t)) throw DomainError("t must be finite and nonnegative");
  const double R = tasep_radius(m, x, t);
  QuadOptions qo;
  qo.tol = tol;
  std::vector<double> c(static_cast<std::size_t>(2 * m - 1));
  double err = 0.0, cmax = 0.0;
  int nodes = 0;
  for (int n = 0; n < 2 * m - 1; ++n) {
    const long long e = n + x - m;
    auto f = [&](std::span<const cplx> xi) {
      return cpow_int(xi[0], e) * std::exp((xi[0] - 1.0) * t) / cpow_int(xi[0] - 1.0, m);
    };
    const auto r = integrate_torus(f, 1, R, qo);
    if (!r.converged) throw ConvergenceError("tasep_left_mth_cdf: no convergence within the node budget");
    c[static_cast<std::size_t>(n)] = r.value.real();
    err = std::max(err, r.error_estimate + r.roundoff());
    cmax = std::max(cmax, std::abs(r.value.real()));
    nodes = std::max(nodes, r.nodes_used);
  }
  std::vector<double> a(static_cast<std::size_t>(m * m));
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) a[static_cast<std::size_t>(i * m + j)] = c[static_cast<std::size_t>(i - j + m - 1)];
  MarginalResult out;
  out.value = lu_determinant(std::move(a), m);
  // first-order perturbation of an m x m determinant with entries <= cmax
  double fact = 1.0;
  for (int i = 2; i <= m; ++i) fact *= i;
  out.error_estimate = m * fact * std::pow(std::max(cmax, 1.0), m - 1) * err;
  out.nodes_used = nodes;
  out.radius = R;
  out.terms = 2 * m - 1;
  return out;
}

}  // namespace asep
