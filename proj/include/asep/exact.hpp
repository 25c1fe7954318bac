#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "asep/core.hpp"
#include "asep/errors.hpp"
#include "asep/kernel.hpp"
#include "asep/parallel.hpp"
#include "asep/quadrature.hpp"
#include "asep/summation.hpp"

namespace asep {

struct TransitionQuery {
  Configuration Y;
  Configuration X;
  double t = 0.0;
  ModelParams params{0.5, 0.5};

  void validate() const {
    if (X.size() != Y.size()) throw DomainError("X and Y must have the same number of particles");
    if (!(t >= 0.0) || !std::isfinite(t)) throw DomainError("t must be finite and nonnegative");
  }
};

/// Reflects both configurations and swaps p with q.
inline TransitionQuery dual_query(const TransitionQuery& q) {
  return {q.Y.reflected(), q.X.reflected(), q.t, q.params.swapped()};
}

/// Which contour evaluation produced a transition probability.
struct TransitionOptions {
  double tol = 1e-10;
  int max_particles = 5;  // N cap; raise explicitly for larger systems
  double safety = 0.5;    // small-contour radius factor
  Route route = Route::automatic;
  QuadOptions quad{};
};

struct TransitionResult {
  double value = 0.0;
  double error_estimate = 0.0;  // ladder difference plus roundoff floor
  double imag = 0.0;            // discarded imaginary part
  int nodes_used = 0;
  double radius = 0.0;
  Route route = Route::direct;
  bool converged = false;
};

namespace detail {

/// Small-contour transition sums for every exponent tuple drawn from E.
/// Entry (i_1..i_N) holds sum_sigma \oint A_sigma prod_i xi_{sigma(i)}^{E[i_i]-y_{sigma(i)}-1} e^{sum eps t},
/// with the common factor r^{sum E - sum y} removed.
struct TransitionTable {
  int n = 0;
  int m = 0;
  double radius = 0.0;
  std::vector<Site> E;
  std::vector<cplx> full;  // M-node rule
  std::vector<cplx> half;  // M/2-node rule
  double mass = 0.0;       // sum_sigma mean |integrand| / r^{-sum y}

  std::size_t index(std::span<const std::size_t> idx) const {
    std::size_t k = 0;
    for (auto i : idx) k = k * E.size() + i;
    return k;
  }
};

/// out[a][e][b] = sum_k W[e][k] in[a][k][b], contracting one mode of size m.
inline std::vector<cplx> contract_mode(const std::vector<cplx>& in, std::size_t outer, std::size_t m, std::size_t inner,
                                       const std::vector<cplx>& w, std::size_t ne, unsigned threads) {
  std::vector<cplx> out(outer * ne * inner);
  parallel_for(outer * ne, threads, [&](std::size_t ae) {
    const std::size_t a = ae / ne, e = ae % ne;
    cplx* dst = &out[(a * ne + e) * inner];
    for (std::size_t k = 0; k < m; ++k) {
      const cplx wk = w[e * m + k];
      const cplx* src = &in[(a * m + k) * inner];
      for (std::size_t b = 0; b < inner; ++b) dst[b] += wk * src[b];
    }
  });
  return out;
}

inline std::vector<cplx> contract_all(std::vector<cplx> g, int n, int m, const std::vector<Site>& E, unsigned threads) {
  const std::size_t L = E.size(), M = static_cast<std::size_t>(m);
  std::vector<cplx> w(L * M);
  for (std::size_t e = 0; e < L; ++e)
    for (std::size_t k = 0; k < M; ++k) {
      // exponent reduced mod M keeps the phase argument small
      const long long r = ((static_cast<long long>(k) * E[e]) % m + m) % m;
      const double th = 2.0 * std::numbers::pi * static_cast<double>(r) / m;
      w[e * M + k] = cplx(std::cos(th), std::sin(th));
    }
  std::size_t outer = 1, inner = 1;
  for (int j = 1; j < n; ++j) inner *= M;
  for (int j = 0; j < n; ++j) {
    g = contract_mode(g, outer, M, inner, w, L, threads);
    outer *= L;
    if (j + 1 < n) inner /= M;
  }
  return g;
}

inline TransitionTable transition_table(const Configuration& Y, double t, const ModelParams& mp, double radius, int m,
                                        std::vector<Site> E, unsigned threads) {
  const int n = static_cast<int>(Y.size());
  TransitionTable tab;
  tab.n = n;
  tab.m = m;
  tab.radius = radius;
  tab.E = std::move(E);
  const std::size_t L = tab.E.size();
  std::size_t cells = 1, grid = 1;
  for (int j = 0; j < n; ++j) {
    cells *= L;
    grid *= static_cast<std::size_t>(m);
  }
  tab.full.assign(cells, 0.0);
  tab.half.assign(cells, 0.0);
  const auto nodes = circle_nodes(1.0, m);
  const double inv_points = 1.0 / static_cast<double>(grid);
  const std::size_t half_grid = grid >> n;
  std::vector<Permutation> perms;
  for_each_permutation(n, [&](const Permutation& s, int) { perms.push_back(s); });
  NeumaierSum mass;
  std::vector<double> slot_mass(static_cast<std::size_t>(m));
  for (const auto& s : perms) {
    // G(k) = A_sigma(xi) e^{sum eps t} prod_j w_j^{-y_j} / M^N.
    std::vector<cplx> g(grid), gh(half_grid);
    const std::size_t per_slot = grid / static_cast<std::size_t>(m);
    parallel_for(static_cast<std::size_t>(m), threads, [&](std::size_t k0) {
      std::vector<int> idx(static_cast<std::size_t>(n), 0);
      idx[0] = static_cast<int>(k0);
      std::vector<cplx> xi(static_cast<std::size_t>(n));
      NeumaierSum sm;
      for (std::size_t c = 0; c < per_slot; ++c) {
        cplx phase = 1.0, eps_sum = 0.0;
        for (int j = 0; j < n; ++j) {
          const cplx w = nodes[static_cast<std::size_t>(idx[static_cast<std::size_t>(j)])];
          xi[static_cast<std::size_t>(j)] = radius * w;
          phase *= cpow_int(w, -Y[static_cast<std::size_t>(j)]);
          eps_sum += epsilon(xi[static_cast<std::size_t>(j)], mp);
        }
        const cplx v = bethe_amplitude(s, xi, mp) * std::exp(eps_sum * t) * phase * inv_points;
        if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) bad_sample(xi, v);
        const std::size_t lin = k0 * per_slot + c;
        g[lin] = v;
        sm += std::abs(v);
        bool even = true;
        std::size_t hl = 0;
        for (int j = 0; j < n; ++j) {
          even = even && idx[static_cast<std::size_t>(j)] % 2 == 0;
          hl = hl * static_cast<std::size_t>(m / 2) + static_cast<std::size_t>(idx[static_cast<std::size_t>(j)] / 2);
        }
        if (even) gh[hl] = v * static_cast<double>(1U << n);
        for (int j = n - 1; j >= 1; --j) {
          if (++idx[static_cast<std::size_t>(j)] < m) break;
          idx[static_cast<std::size_t>(j)] = 0;
        }
      }
      slot_mass[k0] = sm.value();
    });
    for (double v : slot_mass) mass += v;
    const auto tf = contract_all(std::move(g), n, m, tab.E, threads);
    const auto th = contract_all(std::move(gh), n, m / 2, tab.E, threads);
    // Variable sigma(i) carries the exponent of coordinate i.
    std::vector<std::size_t> ci(static_cast<std::size_t>(n)), vi(static_cast<std::size_t>(n));
    for (std::size_t cell = 0; cell < cells; ++cell) {
      std::size_t rem = cell;
      for (int i = n - 1; i >= 0; --i) {
        ci[static_cast<std::size_t>(i)] = rem % L;
        rem /= L;
      }
      for (int i = 1; i <= n; ++i) vi[static_cast<std::size_t>(s(i) - 1)] = ci[static_cast<std::size_t>(i - 1)];
      const std::size_t src = tab.index(vi);
      tab.full[cell] += tf[src];
      tab.half[cell] += th[src];
    }
  }
  tab.mass = mass.value();
  return tab;
}

struct RouteValue {
  cplx value;
  double ladder;
  double roundoff;
};

/// Reads X from a table: returns the value, ladder difference and roundoff floor.
inline RouteValue read_table(const TransitionTable& tab, const Configuration& Y, const Configuration& X) {
  std::vector<std::size_t> idx;
  long long shift = 0;
  for (std::size_t i = 0; i < X.size(); ++i) {
    auto it = std::lower_bound(tab.E.begin(), tab.E.end(), X[i]);
    if (it == tab.E.end() || *it != X[i]) throw ConsistencyError("transition table does not cover the requested X");
    idx.push_back(static_cast<std::size_t>(it - tab.E.begin()));
    shift += X[i] - Y[i];
  }
  const double scale = ipow(tab.radius, shift);
  const std::size_t c = tab.index(idx);
  const cplx v = tab.full[c] * scale;
  return {v, std::abs(tab.full[c] - tab.half[c]) * scale, 64.0 * std::numeric_limits<double>::epsilon() * tab.mass * scale};
}

inline std::vector<Site> exponent_set(const std::vector<Configuration>& xs, bool negate) {
  std::vector<Site> e;
  for (const auto& x : xs)
    for (Site v : x) e.push_back(negate ? -v : v);
  std::sort(e.begin(), e.end());
  e.erase(std::unique(e.begin(), e.end()), e.end());
  return e;
}

}  // namespace detail

/// Probabilities P_Y(X; t) for a batch of final configurations
/// sharing Y. Each X is read from the direct small-contour table or from the
/// table of the reflected process with p and q swapped, whichever has the
/// smaller error bound.
inline std::vector<TransitionResult> transition_probabilities(const Configuration& Y, const std::vector<Configuration>& Xs,
                                                              double t, const ModelParams& mp,
                                                              const TransitionOptions& opt = {}) {
  const int n = static_cast<int>(Y.size());
  for (const auto& X : Xs) TransitionQuery{Y, X, t, mp}.validate();
  if (!(t >= 0.0) || !std::isfinite(t)) throw DomainError("t must be finite and nonnegative");
  if (n > opt.max_particles)
    throw BudgetError("N = " + std::to_string(n) + " exceeds the particle cap " + std::to_string(opt.max_particles) +
                      "; raise max_particles explicitly");
  if (!(mp.p() > 0.0)) throw DomainError("small-contour requires p>0; use duality");
  const bool use_direct = opt.route != Route::dual;
  const bool use_dual = opt.route == Route::dual || (opt.route == Route::automatic && mp.q() > 0.0);
  if (opt.route == Route::dual && !(mp.q() > 0.0)) throw DomainError("the dual route requires q>0");
  const unsigned threads = resolve_threads(opt.quad.threads);
  double n_fact = 1.0;
  for (int i = 2; i <= n; ++i) n_fact *= i;

  std::vector<TransitionResult> out(Xs.size());
  std::vector<char> done(Xs.size(), 0);
  const Configuration Yd = Y.reflected();
  std::vector<Configuration> Xd;
  for (const auto& X : Xs) Xd.push_back(X.reflected());
  const double r = small_radius(mp, opt.safety);
  const double rd = use_dual ? small_radius(mp.swapped(), opt.safety) : 0.0;

  for (int m = opt.quad.min_nodes;; m *= 2) {
    std::vector<Configuration> pending;
    for (std::size_t i = 0; i < Xs.size(); ++i)
      if (!done[i]) pending.push_back(Xs[i]);
    const auto E = detail::exponent_set(pending, false);
    const auto Ed = detail::exponent_set(pending, true);
    if (std::pow(static_cast<double>(m), n) * n_fact > opt.quad.max_points)
      throw BudgetError("transition_probability: " + std::to_string(m) + "^" + std::to_string(n) +
                        " nodes per permutation exceed the sample budget");
    std::optional<detail::TransitionTable> td, tu;
    if (use_direct) td = detail::transition_table(Y, t, mp, r, m, E, threads);
    if (use_dual) tu = detail::transition_table(Yd, t, mp.swapped(), rd, m, Ed, threads);
    bool all_ok = true;
    const bool last = 2 * m > opt.quad.max_nodes;
    for (std::size_t i = 0; i < Xs.size(); ++i) {
      if (done[i]) continue;
      std::optional<detail::RouteValue> a, b;
      if (td) a = detail::read_table(*td, Y, Xs[i]);
      if (tu) b = detail::read_table(*tu, Yd, Xd[i]);
      const auto bound = [](const detail::RouteValue& rv) { return rv.ladder + rv.roundoff; };
      const bool pick_dual = b && (!a || bound(*b) < bound(*a));
      const auto& rv = pick_dual ? *b : *a;
      TransitionResult res;
      res.value = rv.value.real();
      res.imag = rv.value.imag();
      res.error_estimate = bound(rv);
      res.nodes_used = m;
      res.radius = pick_dual ? rd : r;
      res.route = pick_dual ? Route::dual : Route::direct;
      res.converged = rv.ladder < opt.tol * std::max(1.0, std::abs(res.value));
      if (res.converged || last) {
        out[i] = res;
        done[i] = 1;
      } else {
        all_ok = false;
      }
    }
    if (all_ok || last) break;
  }
  for (auto& res : out) {
    const double floor = std::max(opt.tol, 10.0 * res.error_estimate);
    if (std::abs(res.imag) > floor)
      throw ConsistencyError("imaginary part " + std::to_string(res.imag) + " exceeds tolerance " +
                             std::to_string(floor));
    if (res.value < 0.0) {
      if (res.value < -floor) throw ConsistencyError("transition probability " + std::to_string(res.value) + " is negative");
      res.value = 0.0;
    }
  }
  return out;
}

/// P_Y(X; t) from the small-contour permutation sum.
inline TransitionResult transition_probability(const TransitionQuery& q, const TransitionOptions& opt = {}) {
  q.validate();
  auto res = transition_probabilities(q.Y, {q.X}, q.t, q.params, opt);
  if (!res.front().converged)
    throw ConvergenceError("transition_probability did not reach tol " + std::to_string(opt.tol) + " (estimate " +
                           std::to_string(res.front().error_estimate) + ")");
  return res.front();
}

/// TASEP (p = 1): det( \oint (1-xi)^{j-i} xi^{x_i-y_j-1} e^{eps(xi) t} dxi ).
inline TransitionResult tasep_transition_determinant(const TransitionQuery& q, const TransitionOptions& opt = {}) {
  q.validate();
  if (q.params.p() != 1.0) throw DomainError("tasep_transition_determinant requires p = 1");
  const int n = static_cast<int>(q.Y.size());
  const double r = small_radius(q.params, opt.safety);
  QuadOptions qo = opt.quad;
  qo.tol = opt.tol;
  std::vector<double> a(static_cast<std::size_t>(n * n));
  double err = 0.0;
  int nodes = 0;
  bool conv = true;
  for (int i = 1; i <= n; ++i)
    for (int j = 1; j <= n; ++j) {
      const long long e = q.X.at1(i) - q.Y.at1(j) - 1;
      const int pw = j - i;
      auto f = [&](std::span<const cplx> xi) {
        return cpow_int(1.0 - xi[0], pw) * cpow_int(xi[0], e) * std::exp(epsilon(xi[0], q.params) * q.t);
      };
      const auto res = integrate_torus(f, 1, r, qo);
      a[static_cast<std::size_t>((i - 1) * n + (j - 1))] = res.value.real();
      err = std::max(err, res.error_estimate + res.roundoff());
      nodes = std::max(nodes, res.nodes_used);
      conv = conv && res.converged;
    }
  TransitionResult out;
  out.value = lu_determinant(std::move(a), n);
  out.error_estimate = err * n;
  out.nodes_used = nodes;
  out.radius = r;
  out.route = Route::direct;
  out.converged = conv;
  if (!conv) throw ConvergenceError("determinant entries did not reach tol " + std::to_string(opt.tol));
  return out;
}

}  // namespace asep
