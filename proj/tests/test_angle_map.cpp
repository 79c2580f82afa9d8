#include <gtest/gtest.h>

#include <random>

#include "fixtures.hpp"
#include "polyray/angle_map.hpp"

using namespace polyray;

namespace {

const FundamentalArcs& cubic_arcs() {
  static const FundamentalArcs a = make_arcs(3, 2, Angle(1, 12), Angle(5, 12));
  return a;
}

const FundamentalArcs& quartic_arcs() {
  static const FundamentalArcs a = make_arcs(4, 3, Angle(3, 8), Angle(5, 8));
  return a;
}

const Renormalization& cubic_ren() {
  static const Renormalization ren = build_renormalization(fixtures::cubic());
  return ren;
}

mpq_class q(long a, long b) { return mpq_class(a, b); }

}  // namespace

TEST(BuildArcs, CubicFixture) {
  const auto& a = cubic_arcs();
  ASSERT_EQ(a.arcs.size(), 2u);
  EXPECT_EQ(a.arcs[0].lo, q(17, 36));
  EXPECT_EQ(a.arcs[0].hi, q(25, 36));
  EXPECT_EQ(a.arcs[1].lo, q(29, 36));
  EXPECT_EQ(a.arcs[1].hi, q(37, 36));
  EXPECT_EQ(a.base_fixed, Angle(1, 2));
  EXPECT_EQ(a.b_lo(), q(5, 12));
  EXPECT_EQ(a.b_hi(), q(13, 12));
  // sigma_3 maps each arc affinely onto B.
  for (const auto& arc : a.arcs) {
    EXPECT_EQ(a.lift(arc.lo * 3), a.b_lo());
    EXPECT_EQ(arc.length() * 3, a.b_length());
  }
}

TEST(BuildArcs, QuarticFixture) {
  const auto& a = quartic_arcs();
  ASSERT_EQ(a.arcs.size(), 3u);
  EXPECT_EQ(a.arcs[0].lo, q(21, 32));
  EXPECT_EQ(a.arcs[1].lo, q(29, 32));
  EXPECT_EQ(a.arcs[2].lo, q(37, 32));
  EXPECT_EQ(a.arcs[2].hi, q(43, 32));
  EXPECT_EQ(a.base_fixed, Angle(2, 3));
}

TEST(BuildArcs, DegenerateAndMismatch) {
  EXPECT_THROW(make_arcs(3, 3, Angle(1, 12), Angle(5, 12)), Error);
  try {
    make_arcs(4, 2, Angle(3, 8), Angle(5, 8));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::ModelMismatch);
  }
}

TEST(BuildArcs, OrientationFromTracedRays) {
  const auto& ren = cubic_ren();
  FundamentalArcs a = build_arcs(ren, ren.crash_pairs.at(0));
  EXPECT_EQ(a.gap_hi, cubic_arcs().gap_hi);
  EXPECT_EQ(frac(a.gap_lo), frac(cubic_arcs().gap_lo));
  EXPECT_EQ(a.base_fixed, Angle(1, 2));
}

TEST(Membership, Examples) {
  const auto& a = cubic_arcs();
  LambdaVerdict v = membership(a, Angle(5, 8));
  ASSERT_TRUE(v.member());
  EXPECT_TRUE(v.digits->preperiod.empty());
  EXPECT_EQ(v.digits->period, (std::vector<int>{0, 1}));

  v = membership(a, Angle(3, 4));
  EXPECT_EQ(v.verdict, Verdict::excluded);
  EXPECT_EQ(v.excluded_step, 1);
  EXPECT_FALSE(v.digits);

  v = membership(a, Angle(1, 4));
  EXPECT_EQ(v.excluded_step, 0);
}

TEST(Membership, InvariantUnderSigma) {
  const auto& a = cubic_arcs();
  const long den = 3 * 3 * 3 * 3 * 3 - 1;
  for (long k = 0; k < den; ++k) {
    Angle t(k, den);
    if (!membership(a, t).member()) continue;
    EXPECT_TRUE(membership(a, t.sigma(3)).member()) << t;
    int pre = 0;
    for (long j = 0; j < 3; ++j) pre += membership(a, Angle((t.value() + j) / 3)).member() ? 1 : 0;
    EXPECT_GE(pre, 1) << t;
  }
}

TEST(ComputeP, Examples) {
  const auto& a = cubic_arcs();
  EXPECT_EQ(compute_p(a, Angle(1, 2)), Angle(0, 1));
  EXPECT_EQ(compute_p(a, Angle(5, 8)), Angle(1, 3));
  EXPECT_EQ(compute_p(a, Angle(0, 1)), Angle(0, 1));
  EXPECT_EQ(compute_p(a, Angle(5, 8)).sigma(2), Angle(2, 3));
  EXPECT_EQ(compute_p(a, Angle(7, 8)), Angle(2, 3));
  EXPECT_THROW(compute_p(a, Angle(1, 4)), Error);
}

TEST(ComputeP, ExactSemiconjugacy) {
  for (const FundamentalArcs* a : {&cubic_arcs(), &quartic_arcs()}) {
    const long den = a->D * a->D * a->D * a->D - 1;
    int members = 0;
    for (long k = 0; k < den; ++k) {
      Angle t(k, den);
      if (!membership(*a, t).member()) continue;
      ++members;
      EXPECT_EQ(compute_p(*a, t).sigma(a->m), compute_p(*a, t.sigma(a->D))) << t;
    }
    // One periodic member per itinerary of period dividing 4.
    EXPECT_EQ(members, a->m * a->m * a->m * a->m);
  }
}

TEST(PPreimage, Examples) {
  const auto& a = cubic_arcs();
  EXPECT_EQ(p_preimage(a, Angle(1, 3)).tau, Angle(5, 8));
  PPreimage z = p_preimage(a, Angle(0, 1));
  EXPECT_EQ(z.tau, Angle(1, 2));
  ASSERT_TRUE(z.alternate);
  EXPECT_EQ(*z.alternate, Angle(0, 1));
  EXPECT_FALSE(p_preimage(a, Angle(1, 3)).alternate);
}

TEST(PPreimage, RoundTrip) {
  std::mt19937_64 rng(7);
  for (const FundamentalArcs* a : {&cubic_arcs(), &quartic_arcs()}) {
    for (int i = 0; i < 100; ++i) {
      // Small periods keep the digit streams short.
      long den = static_cast<long>(std::pow(a->m, 1 + rng() % 10)) - 1;
      long num = static_cast<long>(rng() % den);
      Angle t(num, den);
      PPreimage pre = p_preimage(*a, t);
      ASSERT_TRUE(membership(*a, pre.tau).member()) << t;
      EXPECT_EQ(compute_p(*a, pre.tau), t);
    }
    PPreimage h = p_preimage(*a, Angle(1, a->m));
    ASSERT_TRUE(h.alternate);
    EXPECT_EQ(compute_p(*a, *h.alternate), Angle(1, a->m));
  }
}

TEST(ExtendP, Examples) {
  const auto& a = cubic_arcs();
  EXPECT_EQ(extend_p(a, Angle(27, 36)), Angle(1, 2));
  EXPECT_EQ(extend_p(a, Angle(26, 36)), Angle(1, 2));
  EXPECT_EQ(extend_p(a, Angle(2, 3)), Angle(1, 2));
  EXPECT_EQ(extend_p(a, Angle(5, 6)), Angle(1, 2));
  EXPECT_EQ(extend_p(a, Angle(5, 8)), Angle(1, 3));
  EXPECT_EQ(extend_p(a, Angle(1, 4)), Angle(0, 1));
}

TEST(ExtendP, MonotoneDegreeOne) {
  for (const FundamentalArcs* a : {&cubic_arcs(), &quartic_arcs()}) {
    std::vector<Angle> values;
    for (long k = 0; k < 10000; ++k) values.push_back(extend_p(*a, Angle(k, 10000)));
    EXPECT_EQ(cyclic_winding(values), 1);
  }
}

TEST(ExtendP, GapConstancy) {
  GapCheck c = check_gap_constancy(cubic_arcs(), 6);
  EXPECT_EQ(c.gaps_checked, 64);
  EXPECT_EQ(c.violations, 0);
  GapCheck q4 = check_gap_constancy(quartic_arcs(), 4);
  EXPECT_EQ(q4.gaps_checked, 81);
  EXPECT_EQ(q4.violations, 0);
}

TEST(LevelCover, Measure) {
  const auto& a = cubic_arcs();
  EXPECT_EQ(level_cover_measure(a, 0), q(2, 3));
  EXPECT_EQ(level_cover_measure(a, 1), q(4, 9));
  mpq_class expected(2, 3);
  for (int i = 0; i < 10; ++i) expected *= q(2, 3);
  EXPECT_EQ(level_cover_measure(a, 10), expected);
  for (int n = 0; n <= 6; ++n) {
    auto arcs = level_cover_arcs(a, n);
    ASSERT_EQ(arcs.size(), static_cast<std::size_t>(1 << n));
    mpq_class total = 0;
    for (std::size_t i = 0; i < arcs.size(); ++i) {
      total += arcs[i].arc.length();
      if (i > 0) {
        EXPECT_LT(arcs[i - 1].arc.hi, arcs[i].arc.lo);
      }
    }
    EXPECT_EQ(total, level_cover_measure(a, n));
  }
}

TEST(RotationCheck, CubicIsTrivial) {
  RotationResult r = rotation_check(cubic_arcs(), Angle(0, 1), {Angle(5, 8), Angle(7, 8)});
  EXPECT_EQ(r.difference, Angle(0, 1));
  EXPECT_EQ(r.checked, 2);
}

TEST(RotationCheck, QuarticHalfTurn) {
  const auto& a = quartic_arcs();
  std::vector<Angle> sample;
  const long den = 4 * 4 * 4 - 1;
  for (long k = 0; k < den; ++k)
    if (membership(a, Angle(k, den)).member()) sample.push_back(Angle(k, den));
  RotationResult r = rotation_check(a, Angle(0, 1), sample);
  EXPECT_EQ(r.difference, Angle(1, 2));
  EXPECT_EQ(r.k, 1);
  EXPECT_EQ(r.checked, static_cast<int>(sample.size()));
  // p(1/3) = 0.222... = 0, the same value as the base angle.
  EXPECT_EQ(rotation_check(a, Angle(1, 3), {}).difference, Angle(0, 1));
  EXPECT_EQ(rotation_check(a, Angle(0, 1), {}).difference, Angle(1, 2));
}

TEST(FiberClassify, SingletonAndDualPair) {
  const auto& a = cubic_arcs();
  std::vector<PMapEntry> entries{make_entry(a, Angle(5, 8)), make_entry(a, Angle(2, 3, Side::right)),
                                 make_entry(a, Angle(5, 6, Side::left))};
  FiberReport rep = fiber_classify(a, entries, cubic_ren());
  EXPECT_TRUE(rep.pass());
  ASSERT_EQ(rep.fibers.size(), 2u);
  EXPECT_EQ(rep.fibers[0].p_value, Angle(1, 3));
  EXPECT_EQ(rep.fibers[0].fiber_case, FiberCase::singleton);
  EXPECT_EQ(rep.fibers[1].p_value, Angle(1, 2));
  EXPECT_EQ(rep.fibers[1].fiber_case, FiberCase::case_i);
  EXPECT_EQ(rep.entries[1].fiber_id, rep.entries[2].fiber_id);
}

TEST(FiberClassify, FixedRaysAreCaseTwo) {
  const auto& a = cubic_arcs();
  FiberReport rep = fiber_classify(a, {make_entry(a, Angle(0, 1)), make_entry(a, Angle(1, 2))}, cubic_ren());
  EXPECT_TRUE(rep.pass()) << (rep.violations.empty() ? "" : rep.violations.front());
  ASSERT_EQ(rep.fibers.size(), 1u);
  const Fiber& f = rep.fibers[0];
  EXPECT_EQ(f.fiber_case, FiberCase::case_ii);
  EXPECT_LT(f.landing_spread, 1e-4);
  EXPECT_EQ(f.return_time, 1);
  EXPECT_LT(f.return_residual, 1e-5);
  EXPECT_TRUE(f.disjoint);
}

TEST(MembershipNumeric, AgreesWithExact) {
  const auto& a = cubic_arcs();
  const auto& ren = cubic_ren();
  LambdaVerdict v = membership_numeric(ren, a, Angle(5, 8), 8);
  ASSERT_TRUE(v.member());
  EXPECT_TRUE(verdicts_agree(membership(a, Angle(5, 8)), v, 8));
  EXPECT_EQ(v.digits->preperiod.size(), 8u);

  LambdaVerdict g = membership_numeric(ren, a, Angle(3, 4), 8);
  EXPECT_EQ(g.verdict, Verdict::excluded);
  EXPECT_EQ(g.excluded_step, 1);
  EXPECT_EQ(membership_numeric(ren, a, Angle(1, 4), 8).excluded_step, 0);
}

TEST(MembershipNumeric, BoundaryUncertain) {
  const auto& a = cubic_arcs();
  Angle near(mpq_class(5, 12) + mpq_class(1, 10000000000L));
  EXPECT_EQ(membership_numeric(cubic_ren(), a, near, 20).verdict, Verdict::boundary_uncertain);
}
