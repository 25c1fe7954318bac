#include <gtest/gtest.h>

#include "asep/core.hpp"

using namespace asep;

TEST(ModelParams, RejectsRatesOffTheSimplex) {
  EXPECT_THROW(ModelParams(0.6, 0.6), DomainError);
  EXPECT_THROW(ModelParams::from_p(1.2), DomainError);
  EXPECT_THROW(ModelParams::from_p(-0.1), DomainError);
  const auto mp = ModelParams::from_p(0.3);
  EXPECT_DOUBLE_EQ(mp.q(), 0.7);
  EXPECT_DOUBLE_EQ(mp.swapped().p(), 0.7);
  EXPECT_TRUE(ModelParams::from_p(0.5).symmetric());
}

TEST(Configuration, StrictlyIncreasingAndReflection) {
  EXPECT_THROW(Configuration({0, 0}), DomainError);
  EXPECT_THROW(Configuration({3, 1}), DomainError);
  EXPECT_THROW(Configuration(std::vector<Site>{}), DomainError);
  const Configuration y{-2, 0, 5};
  EXPECT_EQ(y.reflected(), (Configuration{-5, 0, 2}));
  EXPECT_EQ(y.reflected().reflected(), y);
  EXPECT_EQ(y.at1(3), 5);
}

TEST(IndexSet, ComplementAndStatistics) {
  const IndexSet s({1, 3}, 4);
  EXPECT_EQ(s.complement(), IndexSet({2, 4}, 4));
  EXPECT_EQ(sigma_sum(s), 4);
  // positions of {1,3} inside {1,2,3}: 1 + 3
  EXPECT_EQ(sigma_positions(s, IndexSet({1, 2, 3}, 4)), 4);
  EXPECT_THROW(sigma_positions(IndexSet({4}, 4), IndexSet({1, 2}, 4)), DomainError);
  EXPECT_THROW(IndexSet({0}, 3), DomainError);
  EXPECT_THROW(IndexSet({2, 2}, 3), DomainError);
}

TEST(IndexSet, SignCountsCrossingPairs) {
  // U = {2} in {1,2,3}: pairs (i in U, j not in U, i > j) = {(2,1)}
  EXPECT_EQ(sign_of_set(IndexSet({2}, 3)), -1);
  EXPECT_EQ(sign_of_set(IndexSet({3}, 3)), 1);
  EXPECT_EQ(sign_of_set(IndexSet({1, 2}, 3)), 1);
  EXPECT_EQ(sign_of_set(IndexSet({2, 3}, 3)), 1);
  EXPECT_EQ(sign_of_set(IndexSet({1, 3}, 3)), -1);
}

TEST(Subsets, EnumerationCounts) {
  int total = 0, of_two = 0;
  for_each_subset(5, [&](const IndexSet&) { ++total; });
  for_each_subset_of_size(5, 2, [&](const IndexSet& s) {
    EXPECT_EQ(s.size(), 2);
    ++of_two;
  });
  EXPECT_EQ(total, 32);
  EXPECT_EQ(of_two, 10);
}

TEST(Brackets, SmallCasesByHand) {
  const auto mp = ModelParams::from_p(0.3);
  const double p = 0.3, q = 0.7;
  EXPECT_NEAR(qbracket(1, mp), 1.0, 1e-15);
  EXPECT_NEAR(qbracket(2, mp), p + q, 1e-15);
  EXPECT_NEAR(qbracket(3, mp), p * p + p * q + q * q, 1e-15);
  EXPECT_NEAR(qbracket_binom(3, 1, mp), qbracket(3, mp), 1e-15);
  EXPECT_NEAR(qbracket_binom(4, 2, mp), qbracket(4, mp) * qbracket(3, mp) / qbracket(2, mp), 1e-14);
  EXPECT_DOUBLE_EQ(qbracket_binom(6, 0, mp), 1.0);
  EXPECT_DOUBLE_EQ(qbracket_binom(6, 6, mp), 1.0);
  EXPECT_THROW(qbracket_binom(3, 4, mp), DomainError);
}

TEST(Brackets, SymmetricCaseIsOrdinaryBinomialTimesPowers) {
  const auto mp = ModelParams::from_p(0.5);
  // [N] = N 2^{1-N}; [6 over 2] = 15 * 2^{-(2*4)}
  EXPECT_NEAR(qbracket(4, mp), 4.0 / 8.0, 1e-15);
  EXPECT_NEAR(qbracket_binom(6, 2, mp), 15.0 / 256.0, 1e-15);
  // binom(60,30) 2^{-900}: representable, though the factor products are not
  EXPECT_NEAR(qbracket_binom(60, 30, mp) / 1.39913171766408e-254, 1.0, 1e-12);
}

TEST(Brackets, TotallyAsymmetricLimits) {
  // q = 0: [N] = p^{N-1} = 1, every bracket binomial is 1.
  const auto tasep = ModelParams::from_p(1.0);
  EXPECT_DOUBLE_EQ(qbracket(7, tasep), 1.0);
  EXPECT_DOUBLE_EQ(qbracket_binom(7, 3, tasep), 1.0);
}

TEST(Linear, LuDeterminant) {
  EXPECT_NEAR(lu_determinant({2, 1, 1, 3}, 2), 5.0, 1e-15);
  EXPECT_NEAR(lu_determinant({0, 1, 1, 0}, 2), -1.0, 1e-15);
  EXPECT_NEAR(lu_determinant({1, 2, 3, 4, 5, 6, 7, 8, 10}, 3), -3.0, 1e-13);
  EXPECT_EQ(lu_determinant({1, 2, 2, 4}, 2), 0.0);
}

TEST(Ipow, NegativeExponents) {
  EXPECT_DOUBLE_EQ(ipow(2.0, 10), 1024.0);
  EXPECT_DOUBLE_EQ(ipow(2.0, -2), 0.25);
  EXPECT_DOUBLE_EQ(ipow(0.3, 0), 1.0);
}
