#include <gtest/gtest.h>

#include "asep/identities.hpp"

using namespace asep;

class IdentitySweep : public ::testing::TestWithParam<double> {};

TEST_P(IdentitySweep, PermutationIdentities) {
  const auto mp = ModelParams::from_p(GetParam());
  for (int n = 1; n <= 6; ++n) {
    const auto a = check_perm_identity(n, mp), b = check_perm_identity_dual(n, mp);
    EXPECT_TRUE(a.passed) << "N=" << n << " err " << a.max_rel_error;
    EXPECT_TRUE(b.passed) << "N=" << n << " err " << b.max_rel_error;
    EXPECT_LT(b.route_agreement, 1e-9);
    EXPECT_EQ(a.samples, 30);
  }
}

TEST_P(IdentitySweep, SubsetIdentities) {
  const auto mp = ModelParams::from_p(GetParam());
  for (int n = 1; n <= 6; ++n)
    for (int m = 0; m <= n; ++m) {
      if (m < n) {
        EXPECT_TRUE(check_subset_identity(n, m, mp).passed) << "N=" << n << " m=" << m;
      }
      EXPECT_TRUE(check_simple_subset_identity(n, m, mp).passed) << "N=" << n << " m=" << m;
    }
  EXPECT_TRUE(check_bracket_recursion(40, mp).passed);
}

TEST_P(IdentitySweep, BetheBoundary) {
  IdentityOptions o;
  o.samples = 20;
  o.tol = 1e-12;
  for (int n = 2; n <= 5; ++n) EXPECT_TRUE(check_bethe_boundary(n, ModelParams::from_p(GetParam()), o).passed);
}

INSTANTIATE_TEST_SUITE_P(Rates, IdentitySweep, ::testing::Values(0.3, 0.5, 0.7, 0.9));

TEST(Identities, SeededAndReproducible) {
  const auto mp = ModelParams::from_p(0.4);
  IdentityOptions o;
  o.seed = 99;
  const auto a = check_perm_identity(4, mp, o), b = check_perm_identity(4, mp, o);
  EXPECT_EQ(a.max_rel_error, b.max_rel_error);
  o.seed = 100;
  EXPECT_NE(check_perm_identity(4, mp, o).max_rel_error, a.max_rel_error);
}

TEST(Identities, DetectsAWrongRightSide) {
  // Feeding p and q swapped to the right side breaks the identity.
  const auto mp = ModelParams::from_p(0.3);
  const std::vector<cplx> xi{{0.01, 0.02}, {-0.03, 0.01}, {0.02, -0.04}};
  const cplx lhs = detail::perm_identity_lhs(xi, mp);
  EXPECT_LT(std::abs(lhs - detail::perm_identity_rhs(xi, mp)), 1e-12 * std::abs(lhs));
  EXPECT_GT(std::abs(lhs - detail::perm_identity_rhs(xi, mp.swapped())), 1e-3 * std::abs(lhs));
}

TEST(Identities, TwoParticleSimpleSubsetByHand) {
  // N = 2, m = 1: (p + q a b - a)/(b - a) + (p + q a b - b)/(a - b) = 1 = [2 over 1] at p + q = 1
  const auto mp = ModelParams::from_p(0.35);
  const cplx a(0.4, 0.1), b(-0.2, 0.3);
  const cplx v = pair_factor(a, b, mp) / (b - a) + pair_factor(b, a, mp) / (a - b);
  EXPECT_LT(std::abs(v - qbracket_binom(2, 1, mp)), 1e-14);
}

TEST(Identities, Preconditions) {
  const auto mp = ModelParams::from_p(0.5);
  EXPECT_THROW(check_perm_identity(8, mp), DomainError);
  EXPECT_THROW(check_subset_identity(3, 3, mp), DomainError);
  EXPECT_THROW(check_bethe_boundary(1, mp), DomainError);
}
