#include <gtest/gtest.h>

#include <cmath>

#include "asep/moments.hpp"
#include "frozen_values.hpp"

using namespace asep;

namespace {
Configuration cfg(std::initializer_list<long long> v) { return Configuration(std::vector<Site>(v.begin(), v.end())); }
}  // namespace

TEST(Bessel, FreeWalkClosedFormMatchesFrozen) {
  for (const auto& r : frozen::kFreeWalk) {
    const double p = r.p, q = 1.0 - p;
    const double v = std::exp(-r.t) * std::pow(p / q, r.n / 2.0) * bessel_i(r.n, 2.0 * std::sqrt(p * q) * r.t);
    EXPECT_NEAR(v, r.value, 1e-15) << "n=" << r.n;
  }
}

TEST(Bessel, NormalizationAndSymmetry) {
  for (double x : {0.0, 0.3, 1.0, 4.0, 25.0, 300.0}) {
    const auto tab = bessel_table(400, x);
    double s = tab.scaled_at(0);
    for (int n = 1; n <= 400; ++n) s += 2.0 * tab.scaled_at(n);
    EXPECT_NEAR(s, 1.0, 1e-13) << "x=" << x;
    EXPECT_EQ(tab.scaled_at(-3), tab.scaled_at(3));
  }
  EXPECT_NEAR(bessel_i(0, 1.0), 1.2660658777520082, 1e-15);
  EXPECT_NEAR(bessel_i(3, 2.5), 0.47437040877803555, 1e-14);
  EXPECT_THROW(bessel_table(20000, 1.0), DomainError);
  EXPECT_THROW(bessel_i(0, 1000.0), EvaluationError);
}

TEST(Psi, SingleIntegralMatchesBesselForm) {
  MomentOptions o;
  o.tol = 1e-12;
  for (double p : {0.3, 0.6}) {
    const auto mp = ModelParams::from_p(p);
    for (long long z : {1LL, 2LL, 4LL})
      for (double t : {0.25, 1.0}) {
        const long long zz[] = {z};
        const auto r = psi_integral(1, zz, t, mp, o);
        const double b = psi1_bessel(z, t, mp);
        EXPECT_NEAR(r.value, b, 1e-10 * std::max(1.0, std::abs(b))) << "z=" << z << " t=" << t;
      }
  }
}

TEST(Psi, Refusals) {
  const auto mp = ModelParams::from_p(0.5);
  const long long five[] = {9, 8, 7, 6, 5};
  EXPECT_THROW(psi_integral(5, five, 1.0, mp), BudgetError);
  const long long bad[] = {1, 2};
  EXPECT_THROW(psi_integral(2, bad, 1.0, mp), DomainError);
  EXPECT_THROW(expected_first_particle({0, 1}, 1.0, ModelParams::from_p(0.0)), DomainError);
}

TEST(Mean, SingleParticleDrift) {
  EXPECT_NEAR(expected_first_particle({0}, 2.0, ModelParams::from_p(0.8)).value, 1.2, 1e-15);
  EXPECT_NEAR(expected_first_particle({3}, 1.5, ModelParams::from_p(0.25)).value, 3.0 - 0.75, 1e-15);
}

TEST(Mean, MatchesFrozenMasterEquation) {
  for (const auto& r : frozen::kMeanFirst) {
    const auto m = expected_first_particle(cfg(r.y), r.t, ModelParams::from_p(r.p));
    EXPECT_NEAR(m.value, r.value, 1e-9);
    EXPECT_EQ(m.psi.size(), r.y.size() - 1);
  }
}
