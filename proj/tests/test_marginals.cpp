#include <gtest/gtest.h>

#include "asep/marginals.hpp"
#include "asep/oracles.hpp"
#include "frozen_values.hpp"

using namespace asep;

TEST(Marginals, ThreePathsMatchFrozenMasterEquation) {
  const Configuration Y{0, 1, 3};
  const auto mp = ModelParams::from_p(0.3);
  MarginalEngine eng(Y, 0.5, mp);
  for (const auto& r : frozen::kMarginal013) {
    const Site x[] = {r.x};
    EXPECT_NEAR(eng.mth_small(r.m, x)[0].value, r.value, 1e-10) << "m=" << r.m << " x=" << r.x;
    EXPECT_NEAR(eng.mth_large(r.m, x)[0].value, r.value, 1e-10) << "m=" << r.m << " x=" << r.x;
    EXPECT_NEAR(eng.mth_tu(r.m, x)[0].value, r.value, 1e-10) << "m=" << r.m << " x=" << r.x;
  }
}

TEST(Marginals, FirstAndSecondParticleFormulas) {
  const Configuration Y{0, 1, 3};
  const auto mp = ModelParams::from_p(0.3);
  for (const auto& r : frozen::kMarginal013) {
    const MarginalQuery q{Y, r.m, r.x, 0.5, mp};
    if (r.m == 1 && r.x >= -1) {
      EXPECT_NEAR(first_particle_small(q).value, r.value, 1e-10);
      EXPECT_NEAR(first_particle_large(q).value, r.value, 1e-10);
    }
    if (r.m == 2 && r.x >= 0) {
      EXPECT_NEAR(second_particle(q).value, r.value, 1e-10);
    }
  }
}

TEST(Marginals, CdfRoutesAgreeAndMatchTheOracle) {
  const Configuration Y{0, 2};
  const auto mp = ModelParams::from_p(0.6);
  const auto d = marginal_from_distribution(master_equation_uniformization(Y, 1.0, mp), 1);
  for (Site x = -3; x <= 4; ++x) {
    double tail = 0.0;
    for (const auto& [s, v] : d.prob)
      if (s >= x) tail += v;
    const auto small = first_particle_cdf(Y, x, 1.0, mp, {}, CdfRoute::small);
    const auto large = first_particle_cdf(Y, x, 1.0, mp, {}, CdfRoute::large);
    const auto autor = first_particle_cdf(Y, x, 1.0, mp);
    EXPECT_NEAR(autor.value, tail, 1e-9) << "x=" << x;
    EXPECT_NEAR(large.value, tail, 1e-9) << "x=" << x;
    if (x >= Y[0] - 1) {
      EXPECT_NEAR(small.value, tail, 1e-9) << "x=" << x;
    }
  }
}

TEST(Marginals, TimeZeroIsAPointMass) {
  const Configuration Y{-1, 2, 4};
  const auto mp = ModelParams::from_p(0.7);
  MarginalEngine eng(Y, 0.0, mp);
  const std::vector<Site> xs{-2, -1, 0, 2, 4, 5};
  for (int m = 1; m <= 3; ++m) {
    const auto s = eng.mth_small(m, xs), l = eng.mth_large(m, xs);
    for (std::size_t i = 0; i < xs.size(); ++i) {
      const double want = xs[i] == Y.at1(m) ? 1.0 : 0.0;
      EXPECT_NEAR(s[i].value, want, 1e-10);
      EXPECT_NEAR(l[i].value, want, 1e-10);
    }
  }
}

TEST(Marginals, DualRouteIsTheReflectedSystem) {
  const Configuration Y{0, 1, 3};
  const auto mp = ModelParams::from_p(0.7);
  MarginalEngine eng(Y, 1.0, mp), mirror(Y.reflected(), 1.0, mp.swapped());
  const std::vector<Site> xs{-2, 0, 1, 4};
  std::vector<Site> neg;
  for (Site x : xs) neg.push_back(-x);
  for (int m = 1; m <= 3; ++m) {
    const auto a = eng.mth_small(m, xs, Route::direct);
    const auto b = mirror.mth_small(3 - m + 1, neg, Route::direct);
    const auto c = eng.mth_small(m, xs, Route::dual);
    for (std::size_t i = 0; i < xs.size(); ++i) {
      EXPECT_NEAR(a[i].value, b[i].value, 1e-9);
      EXPECT_EQ(c[i].route, Route::dual);
      EXPECT_NEAR(c[i].value, b[i].value, 1e-13);
    }
  }
}

TEST(Marginals, Preconditions) {
  const auto mp = ModelParams::from_p(0.5);
  EXPECT_THROW(mth_particle_small({{0, 1}, 3, 0, 1.0, mp}), DomainError);
  EXPECT_THROW(first_particle_small({{0, 1}, 2, 0, 1.0, mp}), DomainError);
  EXPECT_THROW(second_particle({{0}, 2, 0, 1.0, mp}), DomainError);
  EXPECT_THROW(first_particle_large({{0, 1}, 1, 0, 1.0, ModelParams::from_p(1.0)}), DomainError);
}

TEST(StepLeft, ContourFormulasMatchFrozenValues) {
  const auto mp = ModelParams::from_p(0.0);
  for (const auto& r : frozen::kStepLeft) {
    EXPECT_NEAR(tasep_left_mth_pmf(r.m, r.x, 1.0, mp).value, r.value, 1e-12) << "m=" << r.m << " x=" << r.x;
    const double diff = tasep_left_mth_cdf(r.m, r.x, 1.0).value - tasep_left_mth_cdf(r.m, r.x - 1, 1.0).value;
    EXPECT_NEAR(diff, r.value, 1e-12);
    EXPECT_NEAR(step_ic_mth_particle(r.m, r.x, 1.0, mp).value, r.value, 1e-10);
  }
}

TEST(StepLeft, DistributionFunctionSaturates) {
  for (int m = 1; m <= 3; ++m) EXPECT_NEAR(tasep_left_mth_cdf(m, m, 1.5).value, 1.0, 1e-12);
}

TEST(Series, StepInitialDataAtTimeZero) {
  const auto mp = ModelParams::from_p(0.5);
  for (int m = 1; m <= 2; ++m)
    for (Site x = 0; x <= 3; ++x)
      EXPECT_NEAR(step_ic_mth_particle(m, x, 0.0, mp).value, x == m ? 1.0 : 0.0, 1e-8);
}

TEST(Series, ShellSumReproducesFiniteSystem) {
  const Configuration Y{0, 1, 3};
  const auto mp = ModelParams::from_p(0.3);
  SeriesControl c;
  c.tol = 1e-10;
  for (const auto& r : frozen::kMarginal013) {
    if (r.x > 1) continue;
    const auto v = mth_particle_large_truncated(Y, r.m, r.x, 0.5, mp, c);
    EXPECT_NEAR(v.value, r.value, 1e-9) << "m=" << r.m << " x=" << r.x;
  }
}

TEST(Series, BoundsAreReportedAndDominateTheSurrogateSchedule) {
  const auto mp = ModelParams::from_p(0.5);
  SeriesControl c;
  const auto v = step_ic_mth_particle(1, -1, 0.5, mp, c);
  EXPECT_TRUE(v.converged);
  EXPECT_LT(v.truncation_bound, c.tol);
  EXPECT_GE(v.truncation_bound, v.truncation_estimate);
  SeriesControl tight = c;
  tight.max_sigma = 2;
  tight.tol = 1e-14;
  const auto cut = step_ic_mth_particle(1, -1, 0.5, mp, tight);
  EXPECT_FALSE(cut.converged);
  EXPECT_GT(cut.truncation_bound, tight.tol);
}

TEST(Series, RadiusCheck) {
  SeriesControl c;
  c.R_override = 2.0;
  EXPECT_THROW(step_ic_mth_particle(1, 0, 0.5, ModelParams::from_p(0.5), c), DomainError);
}
