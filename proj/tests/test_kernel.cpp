#include <gtest/gtest.h>

#include <complex>
#include <set>

#include "asep/kernel.hpp"

using namespace asep;

TEST(Permutation, SignMatchesInversionParity) {
  int count = 0;
  std::set<std::vector<int>> seen;
  for_each_permutation(5, [&](const Permutation& s, int sign) {
    EXPECT_EQ(sign, s.sign());
    seen.insert(std::vector<int>(s.images().begin(), s.images().end()));
    ++count;
  });
  EXPECT_EQ(count, 120);
  EXPECT_EQ(seen.size(), 120u);
}

TEST(Permutation, TranspositionSwapsPositions) {
  const Permutation s({2, 3, 1});
  EXPECT_EQ(s.transposed(1), Permutation({3, 2, 1}));
  EXPECT_EQ(s.inversion_count(), 2);
  EXPECT_THROW(s.transposed(3), DomainError);
  EXPECT_THROW(Permutation({1, 1, 2}), DomainError);
}

TEST(Kernel, EpsilonAndPairFactor) {
  const auto mp = ModelParams::from_p(0.7);
  const cplx z(0.3, 0.4);
  EXPECT_LT(std::abs(epsilon(z, mp) - (0.7 / z + 0.3 * z - 1.0)), 1e-15);
  EXPECT_LT(std::abs(epsilon(1.0, mp)), 1e-15);
  EXPECT_THROW(epsilon(0.0, mp), DomainError);
  EXPECT_LT(std::abs(pair_factor(z, 2.0, mp) - (0.7 + 0.3 * 2.0 * z - z)), 1e-15);
}

TEST(Kernel, TwoParticleScatteringIsAnInvolution) {
  const auto mp = ModelParams::from_p(0.35);
  const cplx a(0.2, 0.1), b(-0.3, 0.25);
  EXPECT_LT(std::abs(s_factor(a, b, mp) * s_factor(b, a, mp) - 1.0), 1e-14);
}

TEST(Kernel, AmplitudeEqualsRatioForm) {
  const auto mp = ModelParams::from_p(0.6);
  const std::vector<cplx> xi{{0.2, 0.1}, {-0.15, 0.3}, {0.05, -0.25}, {0.3, 0.2}};
  for_each_permutation(4, [&](const Permutation& s, int) {
    const cplx a = bethe_amplitude(s, xi, mp), r = bethe_amplitude_ratio(s, xi, mp);
    EXPECT_LT(std::abs(a - r), 1e-12 * std::abs(r));
  });
  EXPECT_EQ(bethe_amplitude(Permutation::identity(4), xi, mp), cplx(1.0));
}

TEST(Kernel, PoleIsReported) {
  // p + q b a - b = 0 at b = p / (1 - q a)
  const auto mp = ModelParams::from_p(0.5);
  const cplx a = 0.4, b = 0.5 / (1.0 - 0.5 * 0.4);
  EXPECT_THROW(s_factor(a, b, mp), PoleError);
}

TEST(Kernel, IntegerPowers) {
  const cplx z(0.6, -0.8);
  EXPECT_LT(std::abs(cpow_int(z, 7) - std::pow(z, 7)), 1e-14);
  EXPECT_LT(std::abs(cpow_int(z, -5) - std::pow(z, -5)), 1e-13);
}
