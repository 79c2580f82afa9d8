#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "polyray/angle.hpp"
#include "polyray/potential.hpp"

using namespace polyray;

namespace {

Polynomial cubic_ab(cplx a, cplx b) { return Polynomial({b, a, 0.0, 1.0}); }
Polynomial quadratic(cplx c) { return Polynomial::unicritical(2, c); }

}  // namespace

TEST(PolynomialTest, RejectsNonMonicAndNonCentered) {
  EXPECT_THROW(Polynomial({1.0, 0.0, 2.0}), Error);
  EXPECT_THROW(Polynomial({1.0, 1.0, 1.0}), Error);
  EXPECT_THROW(Polynomial({1.0, 1.0}), Error);
  try {
    Polynomial({0.0, 0.5, 1.0});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::InvalidPolynomial);
  }
}

TEST(PolynomialTest, JsonRoundTrip) {
  Polynomial p({cplx(0.0, 2.256), 4.32, 0.0, 1.0});
  auto j = to_json(p);
  EXPECT_EQ(j["degree"], 3);
  EXPECT_EQ(polynomial_from_json(j), p);
  nlohmann::json bad = {{"degree", 2}, {"coeffs", {{1, 0}, {0, 0}, {2, 0}}}};
  EXPECT_THROW(polynomial_from_json(bad), Error);
  nlohmann::json shortj = {{"degree", 3}, {"coeffs", {{1, 0}, {0, 0}, {1, 0}}}};
  EXPECT_THROW(polynomial_from_json(shortj), Error);
}

TEST(EvalOrbit, SquaringMap) {
  auto o = eval_orbit(quadratic(0.0), 2.0, 3);
  ASSERT_EQ(o.points.size(), 4u);
  EXPECT_EQ(o.points[3], cplx(256.0));
  EXPECT_FALSE(o.overflow);
}

TEST(EvalOrbit, ChebyshevFixedPoint) {
  auto o = eval_orbit(quadratic(-2.0), 2.0, 2);
  for (auto z : o.points) EXPECT_EQ(z, cplx(2.0));
}

TEST(EvalOrbit, CubicFixedPoint) {
  auto o = eval_orbit(cubic_ab(-3.0, 0.0), 2.0, 2);
  for (auto z : o.points) EXPECT_EQ(z, cplx(2.0));
}

TEST(EvalOrbit, OverflowTruncates) {
  auto o = eval_orbit(quadratic(0.0), 1e10, 20);
  EXPECT_TRUE(o.overflow);
  EXPECT_LT(o.points.size(), 21u);
}

TEST(CriticalPoints, SimpleCubic) {
  auto cs = critical_points(cubic_ab(-3.0, 0.0));
  ASSERT_EQ(cs.size(), 2u);
  EXPECT_NEAR(cs[0].point.real(), -1.0, 1e-12);
  EXPECT_NEAR(cs[1].point.real(), 1.0, 1e-12);
  EXPECT_EQ(cs[0].multiplicity, 1);
}

TEST(CriticalPoints, DoubleRoot) {
  auto cs = critical_points(cubic_ab(0.0, cplx(0.3, 0.1)));
  ASSERT_EQ(cs.size(), 1u);
  EXPECT_NEAR(std::abs(cs[0].point), 0.0, 1e-12);
  EXPECT_EQ(cs[0].multiplicity, 2);
}

TEST(CriticalPoints, Quadratic) {
  auto cs = critical_points(quadratic(cplx(-0.5, 0.2)));
  ASSERT_EQ(cs.size(), 1u);
  EXPECT_EQ(cs[0].multiplicity, 1);
}

TEST(CriticalPoints, MultiplicitiesSumToDegreeMinusOne) {
  Polynomial p({cplx(0.1, 0.2), cplx(-1.0, 0.5), cplx(0.3, 0.0), 0.0, 1.0});
  int total = 0;
  for (const auto& c : critical_points(p)) total += c.multiplicity;
  EXPECT_EQ(total, 3);
}

TEST(EscapeRadius, Examples) {
  EXPECT_EQ(escape_radius(quadratic(0.0)), 2.0);
  EXPECT_EQ(escape_radius(quadratic(-2.0)), 3.0);
  EXPECT_EQ(escape_radius(cubic_ab(-3.0, 1.0)), 5.0);
}

TEST(GreenPotential, PowerMap) {
  auto p = quadratic(0.0);
  auto g = green_potential(p, 4.0, 1e-12);
  EXPECT_TRUE(g.escaped);
  EXPECT_NEAR(g.value, std::log(4.0), 1e-14);
  EXPECT_LE(g.error_bound, 1e-12);
  EXPECT_NEAR(green_potential(p, 16.0).value, 2.0 * std::log(4.0), 1e-14);
}

TEST(GreenPotential, FunctionalEquationAtEscapingCritical) {
  // z^3 - 3z - 3: P(1) = -5 escapes, -1 is a superattracting fixed point.
  auto p = cubic_ab(-3.0, -3.0);
  const double tol = 1e-13;
  auto u1 = green_potential(p, 1.0, tol);
  auto u_img = green_potential(p, p(1.0), tol);
  ASSERT_TRUE(u1.escaped);
  EXPECT_NEAR(u_img.value, 3.0 * u1.value, 2.0 * 3.0 * tol + 1e-14);
}

TEST(GreenPotential, NotEscapedIsVerdict) {
  auto g = green_potential(quadratic(-1.0), 0.0, 1e-12, 100);
  EXPECT_FALSE(g.escaped);
  EXPECT_EQ(g.value, 0.0);
  EXPECT_THROW(green_potential(quadratic(0.0), 0.5, 0.0), Error);
}

TEST(GreenPotential, ErrorBoundShrinksWithBudget) {
  auto p = cubic_ab(-3.0, -3.0);
  auto a = green_potential(p, 1.0, 1e-30, 3);
  auto b = green_potential(p, 1.0, 1e-30, 6);
  ASSERT_TRUE(a.escaped);
  EXPECT_LT(b.error_bound, a.error_bound);
}

TEST(GreenPotential, AsymptoticNearLogModulus) {
  auto p = cubic_ab(cplx(0.5, 0.2), cplx(-0.3, 0.4));
  double r = 10.0 * escape_radius(p);
  for (double t : {0.0, 0.3, 1.7}) {
    cplx z = std::polar(r, t);
    EXPECT_NEAR(green_potential(p, z).value, std::log(r), 1e-3);
  }
}

TEST(ExternalAngle, PowerMap) {
  auto p = quadratic(0.0);
  EXPECT_NEAR(external_angle(p, 4.0), 0.0, 1e-14);
  EXPECT_NEAR(external_angle(p, cplx(0.0, 4.0)), 0.25, 1e-14);
  EXPECT_NEAR(external_angle(p, -4.0), 0.5, 1e-14);
}

TEST(ExternalAngle, AngleActionOnCloseInPoints) {
  Polynomial p({cplx(0.0, 2.256), 4.32, 0.0, 1.0});
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> ang(0.0, kTwoPi);
  int checked = 0;
  for (int i = 0; i < 20; ++i) {
    cplx z = std::polar(2.2, ang(rng));
    if (!green_potential(p, z).escaped) continue;
    double a = external_angle(p, z);
    double b = external_angle(p, p(z));
    EXPECT_NEAR(std::remainder(3.0 * a - b, 1.0), 0.0, 1e-9);
    ++checked;
  }
  EXPECT_GT(checked, 10);
}

TEST(ExternalAngle, RequiresEscape) { EXPECT_THROW(external_angle(quadratic(-1.0), 0.0), Error); }

TEST(ClassifyCriticals, Examples) {
  auto a = classify_criticals(quadratic(4.0), 2048);
  EXPECT_EQ(a.escaping.size(), 1u);
  auto b = classify_criticals(quadratic(-1.0), 2048);
  EXPECT_EQ(b.bounded.size(), 1u);
  // z^3 - 3z + 3: P(-1) = 5 escapes, +1 is fixed.
  auto c = classify_criticals(cubic_ab(-3.0, 3.0), 2048);
  EXPECT_EQ(c.escaping.size(), 1u);
  EXPECT_EQ(c.bounded.size(), 1u);
  EXPECT_GT(c.escaping[0].potential.value, 0.0);
  EXPECT_THROW(classify_criticals(quadratic(0.0), 0), Error);
}

TEST(BottcherTarget, PowerMap) {
  auto p = quadratic(0.0);
  cplx w = bottcher_target(p, 0.0, std::log(8.0));
  EXPECT_NEAR(std::abs(w - 8.0), 0.0, 1e-12);
  cplx v = bottcher_target(p, 0.25, std::log(8.0));
  EXPECT_NEAR(std::abs(v - cplx(0.0, 8.0)), 0.0, 1e-12);
}

TEST(BottcherTarget, ChebyshevRealPoint) {
  auto p = quadratic(-2.0);
  double b = std::log(2.0) + 2.5;
  cplx w = bottcher_target(p, 0.0, b);
  EXPECT_NEAR(w.imag(), 0.0, 1e-12);
  EXPECT_NEAR(green_potential(p, w).value, b, 1e-11);
}
