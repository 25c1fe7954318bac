#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "asep/core.hpp"
#include "asep/errors.hpp"
#include "asep/parallel.hpp"
#include "asep/summation.hpp"

namespace asep {

/// Configuration -> probability, plus mass provably outside the map.
struct SparseDistribution {
  std::map<Configuration, double> prob;
  double tail_bound = 0.0;
  int poisson_terms = 0;  // K + 1 terms of the uniformization series

  double total() const {
    NeumaierSum s;
    for (const auto& [x, v] : prob) s += v;
    return s.value();
  }
  double at(const Configuration& x) const {
    auto it = prob.find(x);
    return it == prob.end() ? 0.0 : it->second;
  }
};

/// Site -> probability for one particle.
struct MarginalDistribution {
  std::map<Site, double> prob;
  double tail_bound = 0.0;
  double at(Site x) const {
    auto it = prob.find(x);
    return it == prob.end() ? 0.0 : it->second;
  }
};

struct UniformizationOptions {
  double tol = 1e-12;
  int max_particles = 6;
  int max_terms = 400;
  std::size_t max_states = 20'000'000;
};

/// Smallest K with P(Poisson(lambda) > K) < tol, and that tail.
inline std::pair<int, double> poisson_cutoff(double lambda, double tol, int max_terms) {
  // Tail summed from its own terms so tiny tails keep full relative accuracy.
  auto tail_above = [lambda](int k) {
    double term = std::exp(-lambda + (k + 1) * std::log(std::max(lambda, 1e-300)) - std::lgamma(k + 2.0));
    if (lambda == 0.0) return 0.0;
    NeumaierSum s;
    for (int j = k + 1; term > 0.0; ++j) {
      s += term;
      if (j > lambda && term < 1e-30 * s.value()) break;
      term *= lambda / (j + 1);
    }
    return s.value();
  };
  for (int k = 0; k <= max_terms; ++k) {
    const double tail = tail_above(k);
    if (tail < tol) return {k, tail};
  }
  throw BudgetError("uniformization needs more than " + std::to_string(max_terms) + " Poisson terms (lambda = " +
                    std::to_string(lambda) + ")");
}

/// Exact transient law by uniformization with rate Lambda = N.
inline SparseDistribution master_equation_uniformization(const Configuration& Y, double t, const ModelParams& mp,
                                                         const UniformizationOptions& opt = {}) {
  const int n = static_cast<int>(Y.size());
  if (n > opt.max_particles) throw BudgetError("uniformization supports N <= " + std::to_string(opt.max_particles));
  if (!(t >= 0.0) || !std::isfinite(t)) throw DomainError("t must be finite and nonnegative");
  const double lambda = n * t;
  const auto [K, tail] = poisson_cutoff(lambda, opt.tol, opt.max_terms);
  const double p = mp.p() / n, q = mp.q() / n;

  std::map<Configuration, NeumaierSum> acc;
  std::map<Configuration, double> cur{{Y, 1.0}};
  double weight = std::exp(-lambda);
  for (int k = 0; k <= K; ++k) {
    for (const auto& [x, v] : cur) acc[x] += weight * v;
    if (k == K) break;
    std::map<Configuration, double> next;
    for (const auto& [x, v] : cur) {
      double stay = 1.0;
      auto pos = std::vector<Site>(x.begin(), x.end());
      for (int i = 0; i < n; ++i) {
        const auto ui = static_cast<std::size_t>(i);
        if (p > 0.0 && (i == n - 1 || pos[ui + 1] > pos[ui] + 1)) {
          ++pos[ui];
          next[Configuration(pos)] += v * p;
          --pos[ui];
          stay -= p;
        }
        if (q > 0.0 && (i == 0 || pos[ui - 1] < pos[ui] - 1)) {
          --pos[ui];
          next[Configuration(pos)] += v * q;
          ++pos[ui];
          stay -= q;
        }
      }
      if (stay > 0.0) next[x] += v * stay;
    }
    if (next.size() > opt.max_states) throw BudgetError("uniformization state budget exceeded");
    cur = std::move(next);
    weight *= lambda / (k + 1);
  }
  SparseDistribution d;
  for (const auto& [x, s] : acc) d.prob.emplace(x, s.value());
  d.tail_bound = tail;
  d.poisson_terms = K + 1;
  return d;
}

/// Pushforward of a configuration law under X -> x_m.
inline MarginalDistribution marginal_from_distribution(const SparseDistribution& d, int m) {
  MarginalDistribution out;
  out.tail_bound = d.tail_bound;
  for (const auto& [x, v] : d.prob) {
    if (m < 1 || m > static_cast<int>(x.size())) throw DomainError("marginal index m out of range");
    out.prob[x.at1(m)] += v;
  }
  return out;
}

/// Final configurations of independent Gillespie runs.
struct SimBatch {
  std::uint64_t seed = 0;
  int n_runs = 0;
  int n_particles = 0;
  std::vector<Site> finals;  // run-major, n_particles entries per run

  Site position(int run, int m) const {
    return finals[static_cast<std::size_t>(run) * static_cast<std::size_t>(n_particles) + static_cast<std::size_t>(m - 1)];
  }
  std::map<Site, long long> marginal_counts(int m) const {
    std::map<Site, long long> c;
    for (int r = 0; r < n_runs; ++r) ++c[position(r, m)];
    return c;
  }
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Event-driven simulation: attempts at total rate N, a uniform particle,
/// a p/q direction coin, and the move only onto a vacant site.
inline SimBatch gillespie_simulate(const Configuration& Y, double t, const ModelParams& mp, int n_runs,
                                   std::uint64_t seed, unsigned threads = 0) {
  if (n_runs < 0) throw DomainError("n_runs must be nonnegative");
  if (!(t >= 0.0) || !std::isfinite(t)) throw DomainError("t must be finite and nonnegative");
  const int n = static_cast<int>(Y.size());
  SimBatch b;
  b.seed = seed;
  b.n_runs = n_runs;
  b.n_particles = n;
  b.finals.resize(static_cast<std::size_t>(n_runs) * static_cast<std::size_t>(n));
  constexpr int kBlock = 4096;
  const std::size_t blocks = (static_cast<std::size_t>(n_runs) + kBlock - 1) / kBlock;
  parallel_for(blocks, resolve_threads(threads), [&](std::size_t blk) {
    std::vector<Site> pos;
    const int lo = static_cast<int>(blk) * kBlock, hi = std::min(n_runs, lo + kBlock);
    for (int run = lo; run < hi; ++run) {
      std::mt19937_64 rng(splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(run))));
      std::exponential_distribution<double> wait(static_cast<double>(n));
      std::uniform_int_distribution<int> pick(0, n - 1);
      std::uniform_real_distribution<double> coin(0.0, 1.0);
      pos.assign(Y.begin(), Y.end());
      double clock = wait(rng);
      while (clock <= t) {
        const int i = pick(rng);
        const auto ui = static_cast<std::size_t>(i);
        if (coin(rng) < mp.p()) {
          if (i == n - 1 || pos[ui + 1] > pos[ui] + 1) ++pos[ui];
        } else {
          if (i == 0 || pos[ui - 1] < pos[ui] - 1) --pos[ui];
        }
        clock += wait(rng);
      }
      std::copy(pos.begin(), pos.end(), b.finals.begin() + static_cast<std::ptrdiff_t>(run) * n);
    }
  });
  return b;
}

/// Window [1, W] standing in for step initial data when only x_m is observed.
inline Configuration step_window(int m, double t) {
  const int w = m + static_cast<int>(std::ceil(5.0 * t)) + 20;
  std::vector<Site> v(static_cast<std::size_t>(w));
  for (int i = 0; i < w; ++i) v[static_cast<std::size_t>(i)] = i + 1;
  return Configuration(std::move(v));
}

}  // namespace asep
