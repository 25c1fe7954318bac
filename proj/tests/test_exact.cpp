#include <gtest/gtest.h>

#include "asep/exact.hpp"
#include "asep/moments.hpp"
#include "frozen_values.hpp"

using namespace asep;

namespace {
Configuration cfg(std::initializer_list<long long> v) { return Configuration(std::vector<Site>(v.begin(), v.end())); }
}  // namespace

TEST(Transition, TimeZeroIsTheIdentity) {
  const auto mp = ModelParams::from_p(0.5);
  EXPECT_NEAR(transition_probability({{0, 1}, {0, 1}, 0.0, mp}).value, 1.0, 1e-12);
  EXPECT_NEAR(transition_probability({{0, 1}, {0, 2}, 0.0, mp}).value, 0.0, 1e-12);
  EXPECT_NEAR(transition_probability({{0, 2, 3}, {0, 2, 3}, 0.0, ModelParams::from_p(0.8)}).value, 1.0, 1e-12);
}

TEST(Transition, SingleParticleMatchesFrozenBessel) {
  for (const auto& r : frozen::kFreeWalk) {
    const auto res = transition_probability({{0}, {r.n}, r.t, ModelParams::from_p(r.p)});
    EXPECT_NEAR(res.value, r.value, 1e-12) << "n=" << r.n;
  }
}

TEST(Transition, MatchesFrozenMasterEquation) {
  for (const auto& r : frozen::kTransition) {
    const TransitionQuery q{cfg(r.y), cfg(r.x), r.t, ModelParams::from_p(r.p)};
    EXPECT_NEAR(transition_probability(q).value, r.value, 1e-10);
  }
}

TEST(Transition, TasepDeterminantMatchesFrozen) {
  for (const auto& r : frozen::kTransition) {
    if (r.p != 1.0) continue;
    const TransitionQuery q{cfg(r.y), cfg(r.x), r.t, ModelParams::from_p(1.0)};
    EXPECT_NEAR(tasep_transition_determinant(q).value, r.value, 1e-11);
  }
  EXPECT_THROW(tasep_transition_determinant({{0, 1}, {0, 1}, 1.0, ModelParams::from_p(0.9)}), DomainError);
}

TEST(Transition, RoutesAgree) {
  const auto mp = ModelParams::from_p(0.35);
  const TransitionQuery q{{0, 1, 3}, {-1, 2, 4}, 0.8, mp};
  TransitionOptions direct, dual;
  direct.route = Route::direct;
  dual.route = Route::dual;
  const auto a = transition_probability(q, direct), b = transition_probability(q, dual);
  EXPECT_EQ(a.route, Route::direct);
  EXPECT_EQ(b.route, Route::dual);
  EXPECT_NEAR(a.value, b.value, 1e-10);
  // reflection symmetry of the process itself
  EXPECT_NEAR(transition_probability(dual_query(q)).value, a.value, 1e-10);
}

TEST(Transition, BatchMatchesSingles) {
  const auto mp = ModelParams::from_p(0.6);
  const Configuration Y{0, 1};
  const std::vector<Configuration> xs{{0, 1}, {1, 3}, {-2, 4}};
  const auto batch = transition_probabilities(Y, xs, 1.0, mp);
  for (std::size_t i = 0; i < xs.size(); ++i)
    EXPECT_NEAR(batch[i].value, transition_probability({Y, xs[i], 1.0, mp}).value, 1e-13);
}

TEST(Transition, Preconditions) {
  const auto mp = ModelParams::from_p(0.5);
  EXPECT_THROW(transition_probability({{0, 1}, {0}, 1.0, mp}), DomainError);
  EXPECT_THROW(transition_probability({{0}, {0}, -1.0, mp}), DomainError);
  TransitionOptions direct;
  direct.route = Route::direct;
  try {
    transition_probability({{0, 1}, {0, 1}, 1.0, ModelParams::from_p(0.0)}, direct);
    FAIL() << "expected a domain error";
  } catch (const DomainError& e) {
    EXPECT_NE(std::string(e.what()).find("use duality"), std::string::npos);
    EXPECT_EQ(e.exit_code(), 2);
  }
  TransitionOptions small_cap;
  small_cap.max_particles = 2;
  EXPECT_THROW(transition_probability({{0, 1, 2}, {0, 1, 2}, 1.0, mp}, small_cap), Error);
}
