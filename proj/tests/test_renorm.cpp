#include <gtest/gtest.h>

#include <cmath>

#include "fixtures.hpp"
#include "polyray/renorm.hpp"

using namespace polyray;

namespace {

CriticalDatum escaping_at(double u) {
  CriticalDatum c;
  c.potential.value = u;
  c.potential.escaped = true;
  return c;
}

const Renormalization& cubic_ren() {
  static const Renormalization ren = build_renormalization(fixtures::cubic());
  return ren;
}

const Renormalization& quartic_ren() {
  static const Renormalization ren = build_renormalization(fixtures::quartic());
  return ren;
}

}  // namespace

TEST(ChooseBaseLevel, SingleEscaping) {
  Polynomial p = fixtures::cubic();
  BaseLevel b = choose_base_level(p, {escaping_at(0.3)});
  EXPECT_NEAR(b.b0, 0.21, 1e-12);
  EXPECT_GE(b.margin, 1e-3);
  // Certificate: enumerate u/3^k down to 1e-20.
  for (double lv = 0.3; lv > 1e-20; lv /= 3.0) EXPECT_GE(std::abs(b.b0 - lv) / lv, 1e-3);
}

TEST(ChooseBaseLevel, MinimumGoverns) {
  Polynomial p = fixtures::cubic();
  BaseLevel b = choose_base_level(p, {escaping_at(0.9), escaping_at(0.3)});
  EXPECT_NEAR(b.b0, 0.21, 1e-12);
}

TEST(ChooseBaseLevel, NudgedOffCriticalLevel) {
  Polynomial p = fixtures::cubic();
  // 0.63 / 3 = 0.21 collides with 0.7 * 0.3.
  BaseLevel b = choose_base_level(p, {escaping_at(0.3), escaping_at(0.63)});
  EXPECT_NE(b.b0, 0.21);
  EXPECT_NEAR(b.b0, 0.21, 0.01 * 0.21);
  EXPECT_GE(b.margin, 1e-3);
}

TEST(ChooseBaseLevel, EmptyIsNotDisconnected) {
  try {
    choose_base_level(fixtures::cubic(), {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NotDisconnected);
  }
}

TEST(ComponentAddress, ConnectedSingleComponent) {
  Polynomial p = fixtures::connected();
  ComponentAddress a = component_address(p, 0.0, 0.5, 4);
  EXPECT_EQ(a.indices, std::vector<int>(5, 0));
  EXPECT_EQ(a.cutoff, 4);
}

TEST(ComponentAddress, CubicCriticalConstantAndCoCriticalDiffers) {
  Polynomial p = fixtures::cubic();
  double b0 = cubic_ren().b0;
  ComponentAddress c0 = component_address(p, fixtures::kCubicBounded, b0, 2);
  ASSERT_EQ(c0.indices.size(), 3u);
  EXPECT_EQ(c0.indices[0], c0.indices[1]);
  EXPECT_EQ(c0.indices[1], c0.indices[2]);
  // P(z) - P(c0) = (z - c0)^2 (z + 2 c0): the co-critical point is -2 c0.
  cplx co = -2.0 * fixtures::kCubicBounded;
  ComponentAddress cc = component_address(p, co, b0, 2);
  ASSERT_GE(cc.indices.size(), 2u);
  EXPECT_TRUE(cc.indices[0] != c0.indices[0] || cc.indices[1] != c0.indices[1]);
  // Stable across calls.
  EXPECT_EQ(component_address(p, co, b0, 2).indices, cc.indices);
}

TEST(ComponentAddress, EscapingPointIsCutOff) {
  Polynomial p = fixtures::cubic();
  double b0 = cubic_ren().b0;
  double u1 = green_potential(p, fixtures::kCubicEscaping, 1e-14).value;
  // Between b0/3 and b0: inside a level-0 component only.
  cplx z = fixtures::kCubicEscaping;
  ASSERT_GT(u1, b0);
  cplx lo = fixtures::kCubicBounded, hi = z;
  for (int i = 0; i < 200; ++i) {
    cplx mid = 0.5 * (lo + hi);
    if (potential_or_zero(p, mid) > 0.5 * b0) hi = mid; else lo = mid;
  }
  ComponentAddress a = component_address(p, hi, b0, 3);
  EXPECT_EQ(a.cutoff, 0);
  EXPECT_EQ(a.indices.size(), 1u);
}

TEST(BuildRenormalization, Cubic) {
  const Renormalization& ren = cubic_ren();
  EXPECT_EQ(ren.r, 1);
  EXPECT_EQ(ren.m, 2);
  EXPECT_EQ(ren.D, 3);
  EXPECT_GE(ren.b0_margin, 1e-3);
  EXPECT_EQ(ren.kf_address, std::vector<int>(4, 0));
  ASSERT_EQ(ren.probe_counts.size(), 20u);
  for (int c : ren.probe_counts) EXPECT_EQ(c, 2);
  int mult = 0;
  for (const auto& c : ren.interior_criticals) mult += c.multiplicity;
  EXPECT_EQ(ren.m - 1, mult);
  // Nest geometry.
  for (auto z : ren.w1) EXPECT_TRUE(point_in_polygon(ren.w0, z));
  EXPECT_TRUE(point_in_polygon(ren.w1, ren.c0));
}

TEST(BuildRenormalization, Quartic) {
  const Renormalization& ren = quartic_ren();
  EXPECT_EQ(ren.r, 1);
  EXPECT_EQ(ren.m, 3);
  EXPECT_EQ(ren.D, 4);
  EXPECT_EQ(ren.kf_address, std::vector<int>(4, 0));
  for (int c : ren.probe_counts) EXPECT_EQ(c, 3);
  ASSERT_EQ(ren.crash_pairs.size(), 1u);
  EXPECT_EQ(ren.crash_pairs[0].theta1, Angle(3, 8));
  EXPECT_EQ(ren.crash_pairs[0].theta2, Angle(5, 8));
}

TEST(BuildRenormalization, ConnectedIsRejected) {
  try {
    build_renormalization(fixtures::connected());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NotDisconnected);
  }
}

TEST(BuildRenormalization, CantorIsRejected) {
  try {
    build_renormalization(Polynomial::unicritical(2, 4.0));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NoBoundedCritical);
  }
}

TEST(BuildRenormalization, JsonShape) {
  auto j = to_json(cubic_ren());
  EXPECT_EQ(j["r"], 1);
  EXPECT_EQ(j["m"], 2);
  EXPECT_EQ(j["D"], 3);
  EXPECT_TRUE(j["b0"].is_string());
  EXPECT_EQ(j["crash_pairs"][0]["theta1"], "1/12");
  EXPECT_EQ(j["crash_pairs"][0]["theta2"], "5/12");
}

TEST(CrashAnglePair, CubicFixture) {
  const CrashPair& c = cubic_ren().crash_pairs.at(0);
  EXPECT_TRUE(c.exact);
  EXPECT_EQ(c.theta1, Angle(1, 12));
  EXPECT_EQ(c.theta2, Angle(5, 12));
  EXPECT_EQ(c.theta1.sigma(3), c.theta2.sigma(3));
  EXPECT_EQ(c.theta1.sigma(3), Angle(1, 4));
  mpq_class diff = c.theta2.value() - c.theta1.value();
  EXPECT_TRUE(diff == mpq_class(1, 3) || diff == mpq_class(2, 3));
  EXPECT_NEAR(c.level, green_potential(fixtures::cubic(), fixtures::kCubicEscaping, 1e-14).value, 1e-12);
}

TEST(VerifyP2, EmptySampleIsVacuous) {
  P2Report rep = verify_p2(cubic_ren(), {});
  EXPECT_TRUE(rep.pass);
  EXPECT_EQ(rep.rays_checked, 0);
}

TEST(VerifyP2, MemberRaysCrossOnceAtLevel) {
  const Renormalization& ren = cubic_ren();
  P2Report rep = verify_p2(ren, {Angle(1, 2), Angle(5, 8), Angle(7, 8)});
  EXPECT_TRUE(rep.pass) << (rep.violations.empty() ? "" : rep.violations.front());
  EXPECT_EQ(rep.rays_meeting_w1, 3);
  EXPECT_LE(rep.max_crossings, 1);
  EXPECT_LT(rep.worst_level_error, 1e-2);
}

TEST(VerifyP2, DeadGapRayMissesW1) {
  P2Report rep = verify_p2(cubic_ren(), {Angle(3, 4)});
  EXPECT_TRUE(rep.pass);
  EXPECT_EQ(rep.rays_meeting_w1, 0);
}

TEST(VerifyP2, CorruptedBaseLevelIsReported) {
  Renormalization bad = cubic_ren();
  bad.b0 = bad.escaping.at(0).potential.value / 3.0 * (1.0 + 1e-5);
  P2Report rep = verify_p2(bad, {});
  EXPECT_FALSE(rep.pass);
  ASSERT_FALSE(rep.violations.empty());
  EXPECT_NE(rep.violations.front().find("margin"), std::string::npos);
}
