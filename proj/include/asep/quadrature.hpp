#pragma once

#include <cmath>
#include <complex>
#include <functional>
#include <numbers>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "asep/core.hpp"
#include "asep/errors.hpp"
#include "asep/parallel.hpp"
#include "asep/summation.hpp"

namespace asep {

using cplx = std::complex<double>;

/// One circle |xi| = radius sampled at `nodes` equispaced points.
struct ContourSpec {
  double radius = 1.0;
  int nodes = 32;
  void validate() const {
    if (!(radius > 0.0) || !std::isfinite(radius)) throw DomainError("contour radius must be positive and finite");
    if (nodes < 8 || (nodes & (nodes - 1)) != 0) throw DomainError("contour node count must be a power of two >= 8");
  }
};

struct QuadResult {
  cplx value{0.0, 0.0};
  double error_estimate = 0.0;  // |value(M) - value(M/2)|
  int nodes_used = 0;           // M per circle at the last rung
  bool converged = false;
  double magnitude = 0.0;  // mean |f * prod xi| over the grid; roundoff scale
  /// Roundoff floor implied by the integrand size on the contour.
  double roundoff() const noexcept { return 64.0 * 2.220446049250313e-16 * magnitude; }
};

struct QuadOptions {
  double tol = 1e-10;
  int min_nodes = 32;
  int max_nodes = 512;
  double max_points = 1e8;  // per integral, summed over the ladder
  unsigned threads = 0;     // 0: ASEP_THREADS or 1
};

/// r = safety * min(1, r*), r* the positive root of q r^2 + r - p = 0.
inline double small_radius(const ModelParams& mp, double safety = 0.5) {
  if (!(mp.p() > 0.0)) throw DomainError("small-contour formulas require p > 0");
  if (!(safety > 0.0 && safety < 1.0)) throw DomainError("small_radius safety must lie in (0, 1)");
  const double p = mp.p(), q = mp.q();
  // 2p / (1 + sqrt(1 + 4pq)) is the same root without cancellation at small q.
  const double rstar = (q == 0.0) ? p : 2.0 * p / (1.0 + std::sqrt(1.0 + 4.0 * p * q));
  return safety * std::min(1.0, rstar);
}

/// R = max(4, 1/q^2, 2/q) + 1; large enough for the infinite-system series.
inline double large_radius(const ModelParams& mp) {
  if (!(mp.q() > 0.0)) throw DomainError("large-contour formulas require q > 0");
  const double p = mp.p(), q = mp.q();
  const double r = std::max({4.0, 1.0 / (q * q), 2.0 / q}) + 1.0;
  if (!(q * r > 1.0 && p / (q * r - 1.0) < r)) throw ConsistencyError("large_radius failed its pole check");
  return r;
}

/// Smallest radius enclosing every pole of a finite product integrand,
/// widened by 1/safety: R* is the positive root of q R^2 - R - p = 0.
inline double enclosing_radius(const ModelParams& mp, double safety = 0.8) {
  if (!(mp.q() > 0.0)) throw DomainError("large-contour formulas require q > 0");
  if (!(safety > 0.0 && safety < 1.0)) throw DomainError("enclosing_radius safety must lie in (0, 1)");
  const double p = mp.p(), q = mp.q();
  const double rstar = (1.0 + std::sqrt(1.0 + 4.0 * p * q)) / (2.0 * q);
  return std::max(1.0, rstar) / safety;
}

namespace detail {

inline std::vector<cplx> circle_nodes(double radius, int m) {
  std::vector<cplx> out(static_cast<std::size_t>(m));
  for (int k = 0; k < m; ++k) {
    const double th = 2.0 * std::numbers::pi * k / m;
    out[static_cast<std::size_t>(k)] = radius * cplx(std::cos(th), std::sin(th));
  }
  return out;
}

[[noreturn]] inline void bad_sample(std::span<const cplx> xi, cplx v) {
  std::ostringstream os;
  os.precision(17);
  os << "integrand returned " << v << " at node (";
  for (std::size_t i = 0; i < xi.size(); ++i) os << (i ? ", " : "") << xi[i];
  os << ")";
  throw EvaluationError(os.str());
}

struct GridSums {
  cplx all;   // every node of the M grid
  cplx even;  // nodes with all indices even, i.e. the M/2 grid
  double abs_sum;
};

/// Sums f * prod xi over the M-grid. With skip_even, the all-even nodes are
/// left out (their sum is known from the previous rung).
template <class F>
GridSums grid_sum(F& f, std::span<const ContourSpec> cs, int m, bool skip_even, unsigned threads) {
  const int d = static_cast<int>(cs.size());
  std::vector<std::vector<cplx>> nodes;
  for (const auto& c : cs) nodes.push_back(circle_nodes(c.radius, m));
  std::vector<ComplexSum> part_all(static_cast<std::size_t>(m)), part_even(static_cast<std::size_t>(m));
  std::vector<double> part_abs(static_cast<std::size_t>(m), 0.0);
  parallel_for(static_cast<std::size_t>(m), threads, [&](std::size_t k0) {
    std::vector<int> idx(static_cast<std::size_t>(d), 0);
    idx[0] = static_cast<int>(k0);
    std::vector<cplx> xi(static_cast<std::size_t>(d));
    ComplexSum s_all, s_even;
    NeumaierSum s_abs;
    while (true) {
      bool all_even = true;
      for (int j = 0; j < d; ++j) all_even = all_even && (idx[static_cast<std::size_t>(j)] % 2 == 0);
      if (!(skip_even && all_even)) {
        cplx jac = 1.0;
        for (int j = 0; j < d; ++j) {
          xi[static_cast<std::size_t>(j)] = nodes[static_cast<std::size_t>(j)][static_cast<std::size_t>(idx[static_cast<std::size_t>(j)])];
          jac *= xi[static_cast<std::size_t>(j)];
        }
        const cplx v = f(std::span<const cplx>(xi));
        if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) bad_sample(xi, v);
        const cplx w = v * jac;
        s_all += w;
        s_abs += std::abs(w);
        if (all_even) s_even += w;
      }
      int j = d - 1;
      while (j >= 1 && ++idx[static_cast<std::size_t>(j)] == m) idx[static_cast<std::size_t>(j--)] = 0;
      if (j < 1) break;
    }
    part_all[k0] = s_all;
    part_even[k0] = s_even;
    part_abs[k0] = s_abs.value();
  });
  ComplexSum all, even;
  NeumaierSum abs_s;
  for (int k = 0; k < m; ++k) {
    all.merge(part_all[static_cast<std::size_t>(k)]);
    even.merge(part_even[static_cast<std::size_t>(k)]);
    abs_s += part_abs[static_cast<std::size_t>(k)];
  }
  return {all.value(), even.value(), abs_s.value()};
}

}  // namespace detail

/// Tensor-product trapezoid rule for the normalized integral
/// (2 pi i)^{-d} \oint...\oint f(xi) dxi_1...dxi_d over the given circles.
/// The node ladder starts at max(min_nodes, contour nodes) and doubles.
template <class F>
QuadResult integrate_torus(F&& f, std::span<const ContourSpec> contours, const QuadOptions& opt = {}) {
  if (contours.empty()) throw DomainError("integrate_torus needs at least one dimension");
  for (const auto& c : contours) c.validate();
  const int d = static_cast<int>(contours.size());
  const unsigned threads = resolve_threads(opt.threads);
  int m = std::max(opt.min_nodes, contours[0].nodes);
  auto points = [d](int mm) { return std::pow(static_cast<double>(mm), d); };
  if (points(m) > opt.max_points)
    throw BudgetError("integrate_torus: " + std::to_string(m) + "^" + std::to_string(d) +
                      " nodes exceed the sample budget");
  QuadResult res;
  double spent = points(m);
  auto g = detail::grid_sum(f, contours, m, false, threads);
  cplx raw = g.all;
  double abs_raw = g.abs_sum;
  cplx prev = g.even / points(m / 2);
  while (true) {
    res.value = raw / points(m);
    res.error_estimate = std::abs(res.value - prev);
    res.nodes_used = m;
    res.magnitude = abs_raw / points(m);
    // Below the roundoff floor more nodes cannot help; the floor is reported.
    if (res.error_estimate < opt.tol * std::max(1.0, std::abs(res.value)) ||
        res.error_estimate < 2.0 * res.roundoff()) {
      res.converged = true;
      return res;
    }
    const int next = 2 * m;
    if (next > opt.max_nodes || spent + points(next) > opt.max_points) return res;
    auto gn = detail::grid_sum(f, contours, next, true, threads);
    spent += points(next);
    prev = res.value;
    raw += gn.all;
    abs_raw += gn.abs_sum;
    m = next;
  }
}

template <class F>
QuadResult integrate_torus(F&& f, int d, double radius, const QuadOptions& opt = {}) {
  if (d < 1) throw DomainError("integrate_torus needs d >= 1");
  std::vector<ContourSpec> cs(static_cast<std::size_t>(d), ContourSpec{radius, opt.min_nodes});
  return integrate_torus(std::forward<F>(f), std::span<const ContourSpec>(cs), opt);
}

namespace detail {

/// Sum over nondecreasing index tuples, each weighted by its multiset count,
/// for an integrand symmetric in its arguments.
template <class F>
std::pair<cplx, double> symmetric_grid_sum(F& f, int d, double radius, int m, unsigned threads) {
  const auto nodes = circle_nodes(radius, m);
  std::vector<double> fact(static_cast<std::size_t>(d) + 1, 1.0);
  for (int i = 1; i <= d; ++i) fact[static_cast<std::size_t>(i)] = fact[static_cast<std::size_t>(i - 1)] * i;
  std::vector<ComplexSum> parts(static_cast<std::size_t>(m));
  std::vector<double> abs_parts(static_cast<std::size_t>(m), 0.0);
  parallel_for(static_cast<std::size_t>(m), threads, [&](std::size_t k0) {
    std::vector<int> idx(static_cast<std::size_t>(d), static_cast<int>(k0));
    std::vector<cplx> xi(static_cast<std::size_t>(d));
    ComplexSum s;
    NeumaierSum sa;
    while (true) {
      double weight = fact[static_cast<std::size_t>(d)];
      int run = 1;
      cplx jac = 1.0;
      for (int j = 0; j < d; ++j) {
        xi[static_cast<std::size_t>(j)] = nodes[static_cast<std::size_t>(idx[static_cast<std::size_t>(j)])];
        jac *= xi[static_cast<std::size_t>(j)];
        if (j > 0 && idx[static_cast<std::size_t>(j)] == idx[static_cast<std::size_t>(j - 1)]) {
          ++run;
        } else {
          weight /= fact[static_cast<std::size_t>(run)];
          run = 1;
        }
      }
      weight /= fact[static_cast<std::size_t>(run)];
      const cplx v = f(std::span<const cplx>(xi));
      if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) bad_sample(xi, v);
      s += weight * v * jac;
      sa += weight * std::abs(v * jac);
      // Next nondecreasing tuple with idx[0] fixed.
      int j = d - 1;
      while (j >= 1 && idx[static_cast<std::size_t>(j)] == m - 1) --j;
      if (j < 1) break;
      ++idx[static_cast<std::size_t>(j)];
      for (int i = j + 1; i < d; ++i) idx[static_cast<std::size_t>(i)] = idx[static_cast<std::size_t>(j)];
    }
    parts[k0] = s;
    abs_parts[k0] = sa.value();
  });
  ComplexSum tot;
  NeumaierSum ta;
  for (int k = 0; k < m; ++k) {
    tot.merge(parts[static_cast<std::size_t>(k)]);
    ta += abs_parts[static_cast<std::size_t>(k)];
  }
  return {tot.value(), ta.value()};
}

}  // namespace detail

/// Same contract as integrate_torus on a common circle, for integrands that are
/// symmetric under permutations of their arguments. Visits about M^d/d! nodes.
template <class F>
QuadResult integrate_torus_symmetric(F&& f, int d, double radius, const QuadOptions& opt = {}) {
  if (d < 1) throw DomainError("integrate_torus_symmetric needs d >= 1");
  ContourSpec{radius, opt.min_nodes}.validate();
  const unsigned threads = resolve_threads(opt.threads);
  auto points = [d](int mm) { return std::pow(static_cast<double>(mm), d); };
  auto visited = [d](int mm) {
    double c = 1.0;  // C(mm + d - 1, d)
    for (int i = 1; i <= d; ++i) c = c * (mm + i - 1) / i;
    return c;
  };
  int m = opt.min_nodes;
  if (visited(m) > opt.max_points) throw BudgetError("integrate_torus_symmetric: node budget exceeded");
  double spent = visited(m) + visited(m / 2);
  QuadResult res;
  auto half = detail::symmetric_grid_sum(f, d, radius, m / 2, threads);
  cplx prev = half.first / points(m / 2);
  while (true) {
    auto g = detail::symmetric_grid_sum(f, d, radius, m, threads);
    res.value = g.first / points(m);
    res.magnitude = g.second / points(m);
    res.error_estimate = std::abs(res.value - prev);
    res.nodes_used = m;
    if (res.error_estimate < opt.tol * std::max(1.0, std::abs(res.value)) ||
        res.error_estimate < 2.0 * res.roundoff()) {
      res.converged = true;
      return res;
    }
    const int next = 2 * m;
    if (next > opt.max_nodes || spent + visited(next) > opt.max_points) return res;
    spent += visited(next);
    prev = res.value;
    m = next;
  }
}

/// Integrals F(x) = (2 pi i)^{-d} \oint g(xi) (xi_1 ... xi_d)^{x - anchor} dxi
/// over a common circle, for every integer x at once. The anchor keeps the
/// sampled g near unit scale when the natural exponents are large. The grid is sampled once; the
/// samples are binned by sum(k_j) mod M, so each x costs O(M).
class PowerFamily {
 public:
  using Base = std::function<cplx(std::span<const cplx>)>;

  PowerFamily(Base g, int d, double radius, bool symmetric, const QuadOptions& opt, Site anchor = 0)
      : g_(std::move(g)), d_(d), radius_(radius), symmetric_(symmetric), opt_(opt), anchor_(anchor) {
    if (d < 1) throw DomainError("PowerFamily needs d >= 1");
    ContourSpec{radius, opt.min_nodes}.validate();
    build(opt.min_nodes);
  }

  struct Value {
    cplx value;
    double ladder;    // |F_M(x) - F_{M/2}(x)|
    double roundoff;  // floor from the integrand size on the contour
    int nodes;
    bool converged;
  };

  /// F(x), doubling the grid until the ladder meets tol or the budget stops it.
  Value eval(Site x) {
    while (true) {
      Value v = eval_at_current(x);
      if (v.converged || !can_refine()) return v;
      build(2 * m_);
    }
  }
  Value eval_at_current(Site x_abs) const {
    const Site x = x_abs - anchor_;
    const double scale = std::pow(radius_, static_cast<double>(d_) * static_cast<double>(x));
    const cplx full = contract(h_, m_, x) * scale;
    const cplx half = contract(hh_, m_ / 2, x) * scale;
    Value v{full, std::abs(full - half), 64.0 * 2.220446049250313e-16 * mass_ * scale, m_, false};
    v.converged = v.ladder < opt_.tol * std::max(1.0, std::abs(full)) || v.ladder < 2.0 * v.roundoff;
    return v;
  }
  int nodes() const noexcept { return m_; }
  double radius() const noexcept { return radius_; }

 private:
  double points(int m) const {
    if (!symmetric_) return std::pow(static_cast<double>(m), d_);
    double c = 1.0;
    for (int i = 1; i <= d_; ++i) c = c * (m + i - 1) / i;
    return c;
  }
  bool can_refine() const {
    return 2 * m_ <= opt_.max_nodes && spent_ + points(2 * m_) <= opt_.max_points;
  }

  static cplx contract(const std::vector<cplx>& h, int m, Site x) {
    ComplexSum s;
    const long long xm = ((x % m) + m) % m;
    for (int k = 0; k < m; ++k) {
      const long long r = (static_cast<long long>(k) * xm) % m;
      const double th = 2.0 * std::numbers::pi * static_cast<double>(r) / m;
      s += h[static_cast<std::size_t>(k)] * cplx(std::cos(th), std::sin(th));
    }
    return s.value();
  }

  void build(int m) {
    if (points(m) > opt_.max_points || spent_ + points(m) > opt_.max_points)
      throw BudgetError("PowerFamily: " + std::to_string(m) + " nodes in dimension " + std::to_string(d_) +
                        " exceed the sample budget");
    spent_ += points(m);
    m_ = m;
    const auto nodes = detail::circle_nodes(radius_, m);
    std::vector<double> fact(static_cast<std::size_t>(d_) + 1, 1.0);
    for (int i = 1; i <= d_; ++i) fact[static_cast<std::size_t>(i)] = fact[static_cast<std::size_t>(i - 1)] * i;
    const double inv_full = 1.0 / std::pow(static_cast<double>(m), d_);
    const double inv_half = 1.0 / std::pow(static_cast<double>(m / 2), d_);
    const std::size_t um = static_cast<std::size_t>(m);
    std::vector<std::vector<ComplexSum>> part(um, std::vector<ComplexSum>(um)), part_h(um, std::vector<ComplexSum>(um / 2));
    std::vector<double> part_mass(um, 0.0);
    parallel_for(um, resolve_threads(opt_.threads), [&](std::size_t k0) {
      std::vector<int> idx(static_cast<std::size_t>(d_), symmetric_ ? static_cast<int>(k0) : 0);
      idx[0] = static_cast<int>(k0);
      std::vector<cplx> xi(static_cast<std::size_t>(d_));
      auto& ph = part[k0];
      auto& phh = part_h[k0];
      NeumaierSum mass;
      while (true) {
        double weight = 1.0;
        if (symmetric_) {
          weight = fact[static_cast<std::size_t>(d_)];
          int run = 1;
          for (int j = 1; j < d_; ++j) {
            if (idx[static_cast<std::size_t>(j)] == idx[static_cast<std::size_t>(j - 1)]) {
              ++run;
            } else {
              weight /= fact[static_cast<std::size_t>(run)];
              run = 1;
            }
          }
          weight /= fact[static_cast<std::size_t>(run)];
        }
        long long ksum = 0;
        bool even = true;
        for (int j = 0; j < d_; ++j) {
          const int k = idx[static_cast<std::size_t>(j)];
          xi[static_cast<std::size_t>(j)] = nodes[static_cast<std::size_t>(k)];
          ksum += k;
          even = even && (k % 2 == 0);
        }
        const cplx v = g_(std::span<const cplx>(xi));
        if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) detail::bad_sample(xi, v);
        // dxi/(2 pi i) = xi dtheta/(2 pi); the radius^d part of prod xi is
        // applied in eval together with radius^{dx}.
        cplx phase = 1.0;
        for (int j = 0; j < d_; ++j) phase *= xi[static_cast<std::size_t>(j)] / radius_;
        const cplx w = weight * v * phase;
        ph[static_cast<std::size_t>(ksum % m)] += w * inv_full;
        mass += std::abs(w) * inv_full;
        if (even) phh[static_cast<std::size_t>((ksum / 2) % (m / 2))] += w * inv_half;
        // advance the odometer (nondecreasing tuples when symmetric)
        int j = d_ - 1;
        if (symmetric_) {
          while (j >= 1 && idx[static_cast<std::size_t>(j)] == m - 1) --j;
          if (j < 1) break;
          ++idx[static_cast<std::size_t>(j)];
          for (int i = j + 1; i < d_; ++i) idx[static_cast<std::size_t>(i)] = idx[static_cast<std::size_t>(j)];
        } else {
          while (j >= 1 && ++idx[static_cast<std::size_t>(j)] == m) idx[static_cast<std::size_t>(j--)] = 0;
          if (j < 1) break;
        }
      }
      part_mass[k0] = mass.value();
    });
    h_.assign(um, 0.0);
    hh_.assign(um / 2, 0.0);
    NeumaierSum mass;
    for (std::size_t s = 0; s < um; ++s) {
      ComplexSum a;
      for (std::size_t k0 = 0; k0 < um; ++k0) a.merge(part[k0][s]);
      h_[s] = a.value() * std::pow(radius_, d_);
    }
    for (std::size_t s = 0; s < um / 2; ++s) {
      ComplexSum a;
      for (std::size_t k0 = 0; k0 < um; ++k0) a.merge(part_h[k0][s]);
      hh_[s] = a.value() * std::pow(radius_, d_);
    }
    for (double v : part_mass) mass += v;
    mass_ = mass.value() * std::pow(radius_, d_);
  }

  Base g_;
  int d_;
  double radius_;
  bool symmetric_;
  QuadOptions opt_;
  Site anchor_;
  int m_ = 0;
  double spent_ = 0.0;
  std::vector<cplx> h_, hh_;
  double mass_ = 0.0;
};

}  // namespace asep
