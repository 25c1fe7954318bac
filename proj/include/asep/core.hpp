#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "asep/errors.hpp"

namespace asep {

using Site = std::int64_t;

/// Hop rates: right with probability p, left with q = 1 - p.
class ModelParams {
 public:
  ModelParams(double p, double q) : p_(p), q_(q) {
    if (!(p >= 0.0) || !(q >= 0.0) || std::abs(p + q - 1.0) > 1e-15)
      throw DomainError("ModelParams requires p, q >= 0 and p + q = 1 (got p=" +
                        std::to_string(p) + ", q=" + std::to_string(q) + ")");
  }
  static ModelParams from_p(double p) {
    if (!(p >= 0.0 && p <= 1.0))
      throw DomainError("p must lie in [0, 1], got " + std::to_string(p));
    return ModelParams(p, 1.0 - p);
  }

  double p() const noexcept { return p_; }
  double q() const noexcept { return q_; }
  ModelParams swapped() const noexcept { return ModelParams(q_, p_, Unchecked{}); }
  bool symmetric() const noexcept { return std::abs(p_ - q_) < 1e-12; }

  friend bool operator==(const ModelParams&, const ModelParams&) = default;

 private:
  struct Unchecked {};
  ModelParams(double p, double q, Unchecked) noexcept : p_(p), q_(q) {}
  double p_;
  double q_;
};

/// Direct evaluation, or evaluation through the reflected system with p and q
/// swapped; automatic picks whichever has the smaller error estimate.
enum class Route { automatic, direct, dual };

inline const char* route_name(Route r) {
  switch (r) {
    case Route::direct: return "direct";
    case Route::dual: return "dual";
    default: return "auto";
  }
}

/// Strictly increasing particle positions x_1 < ... < x_N.
class Configuration {
 public:
  Configuration() = default;
  explicit Configuration(std::vector<Site> positions) : pos_(std::move(positions)) {
    if (pos_.empty()) throw DomainError("a configuration needs at least one particle");
    for (std::size_t i = 1; i < pos_.size(); ++i)
      if (pos_[i] <= pos_[i - 1])
        throw DomainError("configuration positions must be strictly increasing");
  }
  Configuration(std::initializer_list<Site> positions)
      : Configuration(std::vector<Site>(positions)) {}

  std::size_t size() const noexcept { return pos_.size(); }
  Site operator[](std::size_t i) const { return pos_[i]; }
  /// 1-based access matching the particle labels.
  Site at1(int i) const { return pos_.at(static_cast<std::size_t>(i - 1)); }
  std::span<const Site> positions() const noexcept { return pos_; }
  auto begin() const noexcept { return pos_.begin(); }
  auto end() const noexcept { return pos_.end(); }

  /// {-x_N, ..., -x_1}.
  Configuration reflected() const {
    std::vector<Site> r(pos_.rbegin(), pos_.rend());
    for (auto& v : r) v = -v;
    return Configuration(std::move(r));
  }

  friend bool operator==(const Configuration&, const Configuration&) = default;
  friend auto operator<=>(const Configuration&, const Configuration&) = default;

 private:
  std::vector<Site> pos_;
};

/// Subset of {1, ..., N}; members are kept sorted.
class IndexSet {
 public:
  IndexSet() = default;
  IndexSet(std::vector<int> members, int ambient) : members_(std::move(members)), ambient_(ambient) {
    std::sort(members_.begin(), members_.end());
    if (ambient_ < 0) throw DomainError("IndexSet ambient size must be nonnegative");
    for (std::size_t i = 0; i < members_.size(); ++i) {
      if (members_[i] < 1 || members_[i] > ambient_)
        throw DomainError("IndexSet member out of range 1.." + std::to_string(ambient_));
      if (i > 0 && members_[i] == members_[i - 1]) throw DomainError("IndexSet members must be distinct");
    }
  }
  static IndexSet full(int n) {
    std::vector<int> m(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) m[static_cast<std::size_t>(i)] = i + 1;
    return IndexSet(std::move(m), n);
  }
  static IndexSet empty(int n) { return IndexSet({}, n); }
  /// Bit i of `mask` selects member i + 1.
  static IndexSet from_mask(std::uint64_t mask, int n) {
    std::vector<int> m;
    for (int i = 0; i < n; ++i)
      if (mask >> i & 1U) m.push_back(i + 1);
    return IndexSet(std::move(m), n);
  }

  int size() const noexcept { return static_cast<int>(members_.size()); }
  bool empty() const noexcept { return members_.empty(); }
  int ambient() const noexcept { return ambient_; }
  std::span<const int> members() const noexcept { return members_; }
  auto begin() const noexcept { return members_.begin(); }
  auto end() const noexcept { return members_.end(); }
  bool contains(int i) const { return std::binary_search(members_.begin(), members_.end(), i); }

  IndexSet complement() const {
    std::vector<int> c;
    for (int i = 1; i <= ambient_; ++i)
      if (!contains(i)) c.push_back(i);
    return IndexSet(std::move(c), ambient_);
  }
  bool subset_of(const IndexSet& other) const {
    return std::includes(other.members_.begin(), other.members_.end(), members_.begin(), members_.end());
  }
  bool disjoint_from(const IndexSet& other) const {
    return std::none_of(members_.begin(), members_.end(), [&](int i) { return other.contains(i); });
  }
  IndexSet set_union(const IndexSet& other) const {
    std::vector<int> u;
    std::set_union(members_.begin(), members_.end(), other.members_.begin(), other.members_.end(),
                   std::back_inserter(u));
    return IndexSet(std::move(u), std::max(ambient_, other.ambient_));
  }
  IndexSet set_difference(const IndexSet& other) const {
    std::vector<int> d;
    std::set_difference(members_.begin(), members_.end(), other.members_.begin(), other.members_.end(),
                        std::back_inserter(d));
    return IndexSet(std::move(d), ambient_);
  }

  friend bool operator==(const IndexSet&, const IndexSet&) = default;

 private:
  std::vector<int> members_;
  int ambient_ = 0;
};

/// Y_S = {y_i : i in S}.
inline Configuration restrict_to(const Configuration& y, const IndexSet& s) {
  std::vector<Site> out;
  out.reserve(static_cast<std::size_t>(s.size()));
  for (int i : s) out.push_back(y.at1(i));
  return Configuration(std::move(out));
}

inline double ipow(double base, long long e) {
  if (e < 0) return 1.0 / ipow(base, -e);
  double r = 1.0;
  while (e) {
    if (e & 1) r *= base;
    base *= base;
    e >>= 1;
  }
  return r;
}

/// Determinant of an n x n matrix by LU with partial pivoting.
inline double lu_determinant(std::vector<double> a, int n) {
  double det = 1.0;
  for (int c = 0; c < n; ++c) {
    int piv = c;
    for (int r = c + 1; r < n; ++r)
      if (std::abs(a[static_cast<std::size_t>(r * n + c)]) > std::abs(a[static_cast<std::size_t>(piv * n + c)])) piv = r;
    if (a[static_cast<std::size_t>(piv * n + c)] == 0.0) return 0.0;
    if (piv != c) {
      for (int k = 0; k < n; ++k) std::swap(a[static_cast<std::size_t>(c * n + k)], a[static_cast<std::size_t>(piv * n + k)]);
      det = -det;
    }
    const double d = a[static_cast<std::size_t>(c * n + c)];
    det *= d;
    for (int r = c + 1; r < n; ++r) {
      const double f = a[static_cast<std::size_t>(r * n + c)] / d;
      for (int k = c; k < n; ++k) a[static_cast<std::size_t>(r * n + k)] -= f * a[static_cast<std::size_t>(c * n + k)];
    }
  }
  return det;
}

// ---------------------------------------------------------------------------
// Bracket calculus: [N] = (p^N - q^N)/(p - q), [N]!, [N over m].

inline double qbracket(int n, const ModelParams& mp) {
  if (n < 1) throw DomainError("qbracket requires N >= 1");
  const double p = mp.p(), q = mp.q();
  if (std::abs(p - q) < 1e-12) return n * ipow(p, n - 1);
  // sum_{k} p^k q^{n-1-k} avoids the subtraction when p and q are close.
  if (std::abs(p - q) < 0.25) {
    double s = 0.0;
    for (int k = 0; k < n; ++k) s += ipow(p, k) * ipow(q, n - 1 - k);
    return s;
  }
  return (ipow(p, n) - ipow(q, n)) / (p - q);
}

inline double qbracket_factorial(int n, const ModelParams& mp) {
  if (n < 0) throw DomainError("qbracket_factorial requires N >= 0");
  double r = 1.0;
  for (int k = 1; k <= n; ++k) r *= qbracket(k, mp);
  return r;
}

/// [N over m] = [N]! / ([m]! [N-m]!). At p = 0 or q = 0 every [k] is a
/// finite nonzero power, so the products are evaluated as written.
inline double qbracket_binom(int n, int m, const ModelParams& mp) {
  if (n < 0 || m < 0 || m > n)
    throw DomainError("qbracket_binom requires 0 <= m <= N (got N=" + std::to_string(n) +
                      ", m=" + std::to_string(m) + ")");
  const int lo = std::min(m, n - m);
  // ratio per factor; separate products underflow near p = q for N ~ 60
  double r = 1.0;
  for (int k = 1; k <= lo; ++k) r *= qbracket(n - lo + k, mp) / qbracket(k, mp);
  return r;
}

// ---------------------------------------------------------------------------
// Index-set statistics.

/// sigma(S): sum of the indices in S.
inline long long sigma_sum(const IndexSet& s) {
  long long r = 0;
  for (int i : s) r += i;
  return r;
}

/// sigma(T, U): sum of the 1-based positions of the elements of T within U.
inline long long sigma_positions(const IndexSet& t, const IndexSet& u) {
  if (!t.subset_of(u)) throw DomainError("sigma_positions requires T to be a subset of U");
  long long r = 0;
  auto um = u.members();
  for (int i : t) r += (std::lower_bound(um.begin(), um.end(), i) - um.begin()) + 1;
  return r;
}

/// sgn U = (-1)^{#{(i,j): i > j, i in U, j in U^c}}.
inline int sign_of_set(const IndexSet& u) {
  long long count = 0;
  int below_not_in_u = 0;
  for (int j = 1; j <= u.ambient(); ++j) {
    if (u.contains(j))
      count += below_not_in_u;
    else
      ++below_not_in_u;
  }
  return (count % 2 == 0) ? 1 : -1;
}

/// Visits every subset of {1..n} (n <= 62), ordered by size then
/// lexicographically.
template <class F>
void for_each_subset(int n, F&& visit) {
  if (n > 62) throw DomainError("subset enumeration limited to N <= 62");
  std::vector<int> idx;
  for (int k = 0; k <= n; ++k) {
    idx.resize(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) idx[static_cast<std::size_t>(i)] = i + 1;
    while (true) {
      visit(IndexSet(idx, n));
      int i = k - 1;
      while (i >= 0 && idx[static_cast<std::size_t>(i)] == n - k + i + 1) --i;
      if (i < 0) break;
      ++idx[static_cast<std::size_t>(i)];
      for (int j = i + 1; j < k; ++j) idx[static_cast<std::size_t>(j)] = idx[static_cast<std::size_t>(j - 1)] + 1;
    }
  }
}

template <class F>
void for_each_subset_of_size(int n, int k, F&& visit) {
  if (k < 0 || k > n) return;
  std::vector<int> idx(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) idx[static_cast<std::size_t>(i)] = i + 1;
  while (true) {
    visit(IndexSet(idx, n));
    int i = k - 1;
    while (i >= 0 && idx[static_cast<std::size_t>(i)] == n - k + i + 1) --i;
    if (i < 0) break;
    ++idx[static_cast<std::size_t>(i)];
    for (int j = i + 1; j < k; ++j) idx[static_cast<std::size_t>(j)] = idx[static_cast<std::size_t>(j - 1)] + 1;
  }
}

}  // namespace asep
