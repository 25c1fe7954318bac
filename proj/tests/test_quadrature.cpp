#include <gtest/gtest.h>

#include <cmath>

#include "asep/kernel.hpp"
#include "asep/quadrature.hpp"

using namespace asep;

TEST(Quadrature, CauchyCoefficientOfExponential) {
  // (2 pi i)^{-1} \oint e^xi xi^{-n-1} dxi = 1/n!
  for (int n : {0, 1, 4, 9}) {
    auto f = [n](std::span<const cplx> xi) { return std::exp(xi[0]) * cpow_int(xi[0], -n - 1); };
    const auto r = integrate_torus(f, 1, 0.8);
    EXPECT_TRUE(r.converged);
    EXPECT_NEAR(r.value.real(), 1.0 / std::tgamma(n + 1.0), 1e-13);
    EXPECT_NEAR(r.value.imag(), 0.0, 1e-14);
  }
}

TEST(Quadrature, ProductIntegralFactorizes) {
  auto f = [](std::span<const cplx> xi) {
    return std::exp(xi[0] + 2.0 * xi[1]) * cpow_int(xi[0], -3) * cpow_int(xi[1], -2);
  };
  const auto r = integrate_torus(f, 2, 0.5);
  EXPECT_NEAR(r.value.real(), 0.5 * 2.0, 1e-12);  // (1/2!) * (2^1/1!)
}

TEST(Quadrature, SymmetricRuleMatchesFullGrid) {
  auto f = [](std::span<const cplx> xi) {
    cplx v = 1.0;
    for (auto z : xi) v *= std::exp(z) / (z * z);
    return v * (xi[0] - xi[1]) * (xi[0] - xi[1]) * std::exp(xi[0] * xi[1] * xi[2]);
  };
  auto g = [&](std::span<const cplx> xi) {  // symmetrized
    const cplx a = xi[0], b = xi[1], c = xi[2];
    const cplx perms[6][3] = {{a, b, c}, {a, c, b}, {b, a, c}, {b, c, a}, {c, a, b}, {c, b, a}};
    cplx s = 0.0;
    for (auto& pp : perms) s += f(std::span<const cplx>(pp, 3));
    return s / 6.0;
  };
  const auto full = integrate_torus(g, 3, 0.7);
  const auto sym = integrate_torus_symmetric(g, 3, 0.7);
  EXPECT_LT(std::abs(full.value - sym.value), 1e-12);
}

TEST(Quadrature, BudgetIsEnforced) {
  QuadOptions o;
  o.max_points = 1e3;
  auto f = [](std::span<const cplx>) { return cplx(1.0); };
  EXPECT_THROW(integrate_torus(f, 3, 0.5, o), BudgetError);
}

TEST(Quadrature, NonConvergenceIsFlagged) {
  QuadOptions o;
  o.max_nodes = 32;
  o.tol = 1e-15;
  // a pole close to the contour needs many nodes
  auto f = [](std::span<const cplx> xi) { return 1.0 / (xi[0] - 0.99); };
  const auto r = integrate_torus(f, 1, 1.0, o);
  EXPECT_FALSE(r.converged);
}

TEST(Radii, PolesStayOnTheRightSide) {
  for (double p : {0.1, 0.3, 0.5, 0.7, 0.95}) {
    const auto mp = ModelParams::from_p(p);
    const double r = small_radius(mp), q = 1.0 - p;
    // p + q r^2 - r > 0 keeps p + q a b - a away from zero for |a|,|b| <= r
    EXPECT_GT(p - r - q * r * r, 0.0);
    EXPECT_LT(r, 1.0);
    const double R = enclosing_radius(mp, 0.6), L = large_radius(mp);
    EXPECT_GT(q * R * R - R - p, 0.0);
    EXPECT_GE(L, 5.0);
    EXPECT_GT(q * L * L - L - p, 0.0);
  }
  EXPECT_THROW(small_radius(ModelParams::from_p(0.0)), DomainError);
  EXPECT_THROW(large_radius(ModelParams::from_p(1.0)), DomainError);
}

TEST(PowerFamily, AgreesWithDirectIntegrals) {
  const auto mp = ModelParams::from_p(0.4);
  const double t = 0.7;
  PowerFamily::Base g = [&](std::span<const cplx> xi) {
    return std::exp(t * (epsilon(xi[0], mp) + epsilon(xi[1], mp))) * (xi[1] - xi[0]);
  };
  PowerFamily fam(g, 2, 0.3, false, QuadOptions{}, 0);
  for (Site x : {-3, -1, 0, 2, 5}) {
    auto h = [&](std::span<const cplx> xi) { return g(xi) * cpow_int(xi[0] * xi[1], x); };
    const auto direct = integrate_torus(h, 2, 0.3);
    const auto v = fam.eval(x);
    EXPECT_LT(std::abs(v.value - direct.value), 1e-12 + v.roundoff) << "x=" << x;
  }
}
