#pragma once

// Symbolic model of the set Lambda of arguments of rays accumulating on K_f:
// fundamental arcs, exact itineraries, the itinerary map p and its monotone
// extension, fibers of p, and the rotation ambiguity of the digit labelling.

#include <gmpxx.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "polyray/angle.hpp"
#include "polyray/geometry.hpp"
#include "polyray/potential.hpp"
#include "polyray/ray.hpp"
#include "polyray/renorm.hpp"

namespace polyray {

/// Closed arc [lo, hi] of lifted angles.
struct Arc {
  mpq_class lo;
  mpq_class hi;
  mpq_class length() const { return hi - lo; }
};

/// Lifted coordinates: every angle is represented in [gap_hi, gap_hi + 1), so
/// B = [gap_hi, gap_lo + 1] and the arcs appear in increasing order.
struct FundamentalArcs {
  long D = 0;
  int m = 0;
  mpq_class gap_lo;  // G = (gap_lo, gap_hi) mod 1
  mpq_class gap_hi;
  std::vector<Arc> arcs;          // arcs[j] carries digit j
  std::vector<mpz_class> branch;  // psi_j(x) = (x + branch[j]) / D maps B onto arcs[j]
  Angle base_fixed;

  mpq_class b_lo() const { return gap_hi; }
  mpq_class b_hi() const { return gap_lo + 1; }
  mpq_class b_length() const { return b_hi() - b_lo(); }

  mpq_class lift(const mpq_class& t, Side side = Side::none) const {
    mpq_class x = frac(t - gap_hi) + gap_hi;
    if (x == gap_hi && side == Side::left) x += 1;
    return x;
  }

  mpq_class psi(int j, const mpq_class& x) const { return (x + branch[j]) / D; }
  mpq_class sigma_lifted(const mpq_class& x, Side side) const { return lift(x * D, side); }
};

namespace angle_map_detail {

inline bool contains(const mpq_class& lo, const mpq_class& hi, const mpq_class& x, Side side) {
  if (x < lo || x > hi) return false;
  if (x == lo && side == Side::left) return false;
  if (x == hi && side == Side::right) return false;
  return true;
}

inline int arc_of(const FundamentalArcs& a, const mpq_class& x, Side side) {
  for (int j = 0; j < a.m; ++j)
    if (contains(a.arcs[j].lo, a.arcs[j].hi, x, side)) return j;
  return -1;
}

inline mpz_class ipow(long base, std::size_t e) {
  mpz_class r = 1;
  mpz_pow_ui(r.get_mpz_t(), mpz_class(base).get_mpz_t(), e);
  return r;
}

}  // namespace angle_map_detail

/// Arcs of B intersected with sigma_D^{-1}(B), where B is the closed complement
/// of the open gap (gap_lo, gap_hi). Digit 0 goes to the first arc met
/// counterclockwise after the gap; its sigma_D-fixed angle is the base angle.
inline FundamentalArcs make_arcs(long D, int m, const Angle& gap_lo, const Angle& gap_hi) {
  if (D < 2) throw Error(ErrorKind::Domain, "D must be at least 2");
  if (m < 2 || m >= D) throw Error(ErrorKind::Domain, "need 2 <= m < D (no gap otherwise)");
  if (same_point(gap_lo, gap_hi)) throw Error(ErrorKind::Domain, "gap endpoints coincide");
  FundamentalArcs a;
  a.D = D;
  a.m = m;
  a.gap_hi = gap_hi.value();
  a.gap_lo = frac(gap_lo.value() - a.gap_hi) + a.gap_hi;  // in (gap_hi, gap_hi + 1)
  a.gap_lo -= 1;                                           // so that B = [gap_hi, gap_lo + 1]
  const mpq_class blo = a.b_lo(), bhi = a.b_hi();
  for (long k = 0; k < D; ++k) {
    mpq_class lo = (blo + k) / D;
    mpq_class shifted = a.lift(lo);
    mpq_class hi = shifted + (bhi - blo) / D;
    if (hi <= bhi) {
      a.arcs.push_back({shifted, hi});
    } else if (shifted <= bhi || hi > blo + 1) {
      throw Error(ErrorKind::ModelMismatch, "a preimage arc of B straddles the gap");
    }
  }
  if (static_cast<int>(a.arcs.size()) != m)
    throw Error(ErrorKind::ModelMismatch, "found " + std::to_string(a.arcs.size()) + " fundamental arcs, expected m = " +
                                              std::to_string(m));
  std::sort(a.arcs.begin(), a.arcs.end(), [](const Arc& x, const Arc& y) { return x.lo < y.lo; });
  for (const auto& arc : a.arcs) {
    mpq_class k = arc.lo * D - blo;
    if (k.get_den() != 1) throw Error(ErrorKind::ModelMismatch, "arc endpoint is not a preimage of the gap endpoint");
    a.branch.push_back(k.get_num());
  }
  mpq_class fixed = mpq_class(a.branch[0]) / (D - 1);
  if (!angle_map_detail::contains(a.arcs[0].lo, a.arcs[0].hi, fixed, Side::none))
    throw Error(ErrorKind::ModelMismatch, "first arc has no fixed angle");
  a.base_fixed = Angle(fixed);
  return a;
}

/// Default orientation probe: whether the ray at angle t enters W* (the
/// level-b0 component around K_f).
inline std::function<bool(const Angle&)> level0_probe(const Renormalization& ren) {
  return [&ren](const Angle& t) {
    TraceOptions opt = ren.trace_options(-1);
    const double target = ren.b0 * 0.95;
    RayTrace tr = trace_ray(ren.poly, t, std::max(4.0, asymptotic_level(ren.poly)), target, opt);
    if (tr.status == RayStatus::crashed_unresolved) tr = trace_ray(ren.poly, t.with_side(Side::left), 4.0, target, opt);
    return point_in_polygon(ren.w0, tr.samples.back().point);
  };
}

/// Fundamental arcs of an r = 1 renormalization: G is the component of the
/// circle minus the crash pair whose interior sample fails the probe.
inline FundamentalArcs build_arcs(const Renormalization& ren, const CrashPair& pair,
                                  const std::function<bool(const Angle&)>& probe) {
  if (ren.r != 1) throw Error(ErrorKind::Domain, "exact fundamental arcs are only built for period r = 1");
  if (!pair.exact) throw Error(ErrorKind::Domain, "crash pair angles are not rational");
  const mpq_class t1 = pair.theta1.value(), t2 = pair.theta2.value();
  const mpq_class len = frac(t2 - t1);
  // Off-centre samples avoid the symmetric (often crashing) midpoints.
  auto sample = [&](const mpq_class& start, const mpq_class& length) {
    return Angle(start + length * mpq_class(45, 97));
  };
  bool first_member = probe(sample(t1, len));
  bool second_member = probe(sample(t2, 1 - len));
  if (first_member == second_member)
    throw Error(ErrorKind::ModelMismatch, "gap orientation probe is inconclusive");
  FundamentalArcs a = first_member ? make_arcs(ren.D, ren.m, pair.theta2, pair.theta1)
                                   : make_arcs(ren.D, ren.m, pair.theta1, pair.theta2);
  return a;
}

inline FundamentalArcs build_arcs(const Renormalization& ren, const CrashPair& pair) {
  return build_arcs(ren, pair, level0_probe(ren));
}

/// Eventually periodic base-m digits; an empty period marks a finite prefix.
struct DigitStream {
  std::vector<int> preperiod;
  std::vector<int> period;

  bool operator==(const DigitStream&) const = default;

  static std::string join(const std::vector<int>& ds) {
    std::string s;
    for (int d : ds) s += std::to_string(d);
    return s;
  }
  std::string to_string() const { return join(preperiod) + "(" + join(period) + ")"; }
  int at(std::size_t n) const {
    if (n < preperiod.size()) return preperiod[n];
    return period[(n - preperiod.size()) % period.size()];
  }
};

enum class Verdict { member, excluded, boundary_uncertain };

inline const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::member: return "member";
    case Verdict::excluded: return "excluded";
    case Verdict::boundary_uncertain: return "boundary_uncertain";
  }
  return "?";
}

struct LambdaVerdict {
  Angle angle;
  Verdict verdict = Verdict::excluded;
  /// First n with sigma_D^n(tau) outside B, for excluded verdicts.
  int excluded_step = -1;
  std::optional<DigitStream> digits;

  bool member() const { return verdict == Verdict::member; }
};

/// Exact itinerary of a rational angle; side tags decide arc endpoints.
inline LambdaVerdict membership(const FundamentalArcs& a, const Angle& tau) {
  LambdaVerdict out;
  out.angle = tau;
  const Side side = tau.side();
  std::map<mpq_class, int> seen;
  std::vector<int> digits;
  mpq_class x = a.lift(tau.value(), side);
  for (int n = 0;; ++n) {
    if (auto it = seen.find(x); it != seen.end()) {
      DigitStream ds;
      ds.preperiod.assign(digits.begin(), digits.begin() + it->second);
      ds.period.assign(digits.begin() + it->second, digits.end());
      out.verdict = Verdict::member;
      out.digits = ds;
      return out;
    }
    if (!angle_map_detail::contains(a.b_lo(), a.b_hi(), x, side)) {
      out.excluded_step = n;
      return out;
    }
    int j = angle_map_detail::arc_of(a, x, side);
    if (j < 0) {
      out.excluded_step = n + 1;
      return out;
    }
    seen.emplace(x, n);
    digits.push_back(j);
    x = a.sigma_lifted(x, side);
  }
}

/// sum d_n m^{-(n+1)} mod 1 in closed form.
inline mpq_class digits_value(const DigitStream& ds, int m) {
  if (ds.period.empty()) throw Error(ErrorKind::Domain, "digit stream has no period");
  mpz_class pre = 0, per = 0;
  for (int d : ds.preperiod) pre = pre * m + d;
  for (int d : ds.period) per = per * m + d;
  mpz_class mk = angle_map_detail::ipow(m, ds.preperiod.size());
  mpz_class ml = angle_map_detail::ipow(m, ds.period.size());
  mpq_class v = (mpq_class(pre) + mpq_class(per, ml - 1)) / mpq_class(mk);
  v.canonicalize();
  return frac(v);
}

inline Angle compute_p(const FundamentalArcs& a, const Angle& tau) {
  LambdaVerdict v = membership(a, tau);
  if (!v.member()) throw Error(ErrorKind::Domain, "p is only defined on Lambda; " + tau.to_string() + " is not a member");
  return Angle(digits_value(*v.digits, a.m));
}

/// Canonical base-m expansion of a rational in [0, 1) (never ending in m-1
/// repeated); terminating expansions get the period (0).
inline DigitStream base_m_digits(const mpq_class& t, int m) {
  mpq_class x = frac(t);
  std::map<mpq_class, int> seen;
  std::vector<int> ds;
  for (int n = 0;; ++n) {
    if (auto it = seen.find(x); it != seen.end()) {
      DigitStream out;
      out.preperiod.assign(ds.begin(), ds.begin() + it->second);
      out.period.assign(ds.begin() + it->second, ds.end());
      return out;
    }
    seen.emplace(x, n);
    mpq_class y = x * m;
    mpz_class d = floor_of(y);
    ds.push_back(static_cast<int>(d.get_si()));
    x = y - d;
  }
}

/// The member angle with the given itinerary: the fixed point of the composed
/// inverse branches over the period, pulled back through the preperiod.
inline Angle angle_with_digits(const FundamentalArcs& a, const DigitStream& ds) {
  if (ds.period.empty()) throw Error(ErrorKind::Domain, "digit stream has no period");
  mpq_class scale = 1, shift = 0;  // composition x -> scale x + shift
  for (auto it = ds.period.rbegin(); it != ds.period.rend(); ++it) {
    shift = (shift + a.branch[*it]) / a.D;
    scale /= a.D;
  }
  mpq_class y = shift / (1 - scale);
  for (auto it = ds.preperiod.rbegin(); it != ds.preperiod.rend(); ++it) y = a.psi(*it, y);
  y.canonicalize();
  return Angle(y);
}

struct PPreimage {
  Angle tau;
  /// From the second expansion of an m-adic rational, when it has one.
  std::optional<Angle> alternate;
};

inline PPreimage p_preimage(const FundamentalArcs& a, const Angle& t) {
  DigitStream ds = base_m_digits(t.value(), a.m);
  PPreimage out;
  out.tau = angle_with_digits(a, ds);
  if (ds.period == std::vector<int>{0}) {
    DigitStream alt;
    alt.preperiod = ds.preperiod;
    if (!alt.preperiod.empty()) alt.preperiod.back() -= 1;
    alt.period = {a.m - 1};
    Angle second = angle_with_digits(a, alt);
    if (!same_point(second, out.tau)) out.alternate = second;
  }
  return out;
}

/// Monotone degree-one extension of p: on a gap of Lambda, the common value of
/// the one-sided limits. A point leaving the arcs at step n inside the gap
/// after arc j - 1 gets prefix + j m^{-(n+1)}.
inline Angle extend_p(const FundamentalArcs& a, const Angle& t) {
  const Side side = t.side();
  std::map<mpq_class, int> seen;
  std::vector<int> digits;
  mpq_class x = a.lift(t.value(), side);
  for (int n = 0;; ++n) {
    if (auto it = seen.find(x); it != seen.end()) {
      DigitStream ds;
      ds.preperiod.assign(digits.begin(), digits.begin() + it->second);
      ds.period.assign(digits.begin() + it->second, digits.end());
      return Angle(digits_value(ds, a.m));
    }
    int j = angle_map_detail::arc_of(a, x, side);
    if (j < 0) {
      int left = 0;
      while (left < a.m && a.arcs[left].hi <= x) ++left;
      mpq_class v = 0;
      mpq_class w = 1;
      for (int d : digits) {
        w /= a.m;
        v += w * d;
      }
      w /= a.m;
      v += w * left;
      return Angle(v);
    }
    seen.emplace(x, n);
    digits.push_back(j);
    x = a.sigma_lifted(x, side);
  }
}

/// Exact total length |B| (m/D)^n of the level-n cover.
inline mpq_class level_cover_measure(const FundamentalArcs& a, int n) {
  if (n < 0) throw Error(ErrorKind::Domain, "level must be non-negative");
  mpq_class r(a.m, a.D);
  mpq_class v = a.b_length();
  for (int i = 0; i < n; ++i) v *= r;
  return v;
}

struct CoverArc {
  Arc arc;
  std::vector<int> word;
};

/// The m^n arcs {t in B : sigma^k t in the arcs for k < n}, in increasing
/// lifted order.
inline std::vector<CoverArc> level_cover_arcs(const FundamentalArcs& a, int n) {
  if (n < 0) throw Error(ErrorKind::Domain, "level must be non-negative");
  std::vector<CoverArc> cur{{{a.b_lo(), a.b_hi()}, {}}};
  for (int level = 0; level < n; ++level) {
    std::vector<CoverArc> next;
    next.reserve(cur.size() * a.m);
    for (int j = 0; j < a.m; ++j)
      for (const auto& c : cur) {
        CoverArc img{{a.psi(j, c.arc.lo), a.psi(j, c.arc.hi)}, {j}};
        img.word.insert(img.word.end(), c.word.begin(), c.word.end());
        next.push_back(std::move(img));
      }
    cur = std::move(next);
  }
  return cur;
}

struct GapCheck {
  int gaps_checked = 0;
  int violations = 0;
  std::vector<std::string> messages;
};

/// Inside every level-n cover arc (n < max_level) the gap between children j
/// and j + 1 is bounded by the members with itineraries w j (m-1)^inf and
/// w (j+1) 0^inf; both must be members with equal p, and extend_p must take
/// the same value strictly inside the gap.
inline GapCheck check_gap_constancy(const FundamentalArcs& a, int max_level) {
  GapCheck out;
  {
    // The gap around G: from the fixed member of the last arc to the base angle.
    Angle tl = angle_with_digits(a, {{}, {a.m - 1}});
    ++out.gaps_checked;
    LambdaVerdict vl = membership(a, tl), vr = membership(a, a.base_fixed);
    Angle inside((a.gap_lo + a.gap_hi) / 2);
    bool ok = vl.member() && vr.member() && digits_value(*vl.digits, a.m) == digits_value(*vr.digits, a.m) &&
              extend_p(a, inside).value() == digits_value(*vr.digits, a.m);
    if (!ok) {
      ++out.violations;
      out.messages.push_back("gap (" + tl.to_string() + ", " + a.base_fixed.to_string() + ") at level 0");
    }
  }
  for (int n = 0; n < max_level; ++n) {
    for (const auto& c : level_cover_arcs(a, n)) {
      for (int j = 0; j + 1 < a.m; ++j) {
        DigitStream left{c.word, {a.m - 1}}, right{c.word, {0}};
        left.preperiod.push_back(j);
        right.preperiod.push_back(j + 1);
        Angle tl = angle_with_digits(a, left), tr = angle_with_digits(a, right);
        ++out.gaps_checked;
        LambdaVerdict vl = membership(a, tl), vr = membership(a, tr);
        bool ok = vl.member() && vr.member();
        mpq_class pl, pr;
        if (ok) {
          pl = digits_value(*vl.digits, a.m);
          pr = digits_value(*vr.digits, a.m);
          ok = pl == pr;
        }
        if (ok) {
          mpq_class lo = a.lift(tl.value()), hi = a.lift(tr.value());
          if (hi <= lo) hi += 1;
          Angle inside((lo + hi) / 2);
          ok = !membership(a, inside).member() && extend_p(a, inside).value() == pl;
        }
        if (!ok) {
          ++out.violations;
          if (out.messages.size() < 8)
            out.messages.push_back("gap (" + tl.to_string() + ", " + tr.to_string() + ") at level " + std::to_string(n));
        }
      }
    }
  }
  return out;
}

/// Cyclic winding of a sequence of circle values: the sum of forward steps
/// mod 1, closing the loop. A cyclically non-decreasing degree-one sequence
/// gives exactly 1.
inline mpq_class cyclic_winding(const std::vector<Angle>& values) {
  mpq_class total = 0;
  for (std::size_t i = 0; i < values.size(); ++i) total += frac(values[(i + 1) % values.size()].value() - values[i].value());
  return total;
}

struct RotationResult {
  Angle difference;
  long k = 0;
  int checked = 0;
};

/// p relative to alt_base: Lambda is cut at the m member preimages of alt_base
/// and the sectors are labelled counterclockwise from alt_base, giving a
/// second semiconjugacy p~. Returns the constant p~ - p, which must be
/// k/(m-1).
inline RotationResult rotation_check(const FundamentalArcs& a, const Angle& alt_base, const std::vector<Angle>& sample) {
  const Angle alt = alt_base.untagged();
  if (alt.sigma(a.D) != alt) throw Error(ErrorKind::Domain, "alternative base angle is not sigma_D-fixed");
  if (!membership(a, alt).member()) throw Error(ErrorKind::Domain, "alternative base angle is not in Lambda");
  std::vector<mpq_class> cuts;  // lifted relative to alt, in [alt, alt + 1)
  for (long j = 0; j < a.D; ++j) {
    Angle pre((alt.value() + j) / a.D);
    if (membership(a, pre).member()) cuts.push_back(frac(pre.value() - alt.value()));
  }
  std::sort(cuts.begin(), cuts.end());
  if (static_cast<int>(cuts.size()) != a.m)
    throw Error(ErrorKind::ModelMismatch, "alternative base has " + std::to_string(cuts.size()) + " member preimages");
  auto sector = [&](const mpq_class& t) {
    mpq_class rel = frac(t - alt.value());
    int s = 0;
    while (s + 1 < a.m && cuts[s + 1] <= rel) ++s;
    return s;
  };
  auto p_alt = [&](const Angle& tau) {
    std::map<mpq_class, int> seen;
    std::vector<int> digits;
    mpq_class x = tau.value();
    for (int n = 0;; ++n) {
      if (auto it = seen.find(x); it != seen.end()) {
        DigitStream ds;
        ds.preperiod.assign(digits.begin(), digits.begin() + it->second);
        ds.period.assign(digits.begin() + it->second, digits.end());
        return digits_value(ds, a.m);
      }
      seen.emplace(x, n);
      digits.push_back(sector(x));
      x = frac(x * a.D);
    }
  };
  std::vector<Angle> all{a.base_fixed, alt};
  all.insert(all.end(), sample.begin(), sample.end());
  RotationResult out;
  std::optional<mpq_class> diff;
  for (const auto& tau : all) {
    Angle u = tau.untagged();
    if (!membership(a, u).member()) throw Error(ErrorKind::Domain, "rotation sample " + u.to_string() + " is not in Lambda");
    mpq_class d = frac(p_alt(u) - compute_p(a, u).value());
    if (diff && *diff != d)
      throw Error(ErrorKind::TheoremViolation, "relabelled p differs from p by a non-constant amount at " + u.to_string());
    diff = d;
    ++out.checked;
  }
  mpq_class k = *diff * (a.m - 1);
  if (k.get_den() != 1) throw Error(ErrorKind::TheoremViolation, "rotation " + rational_string(*diff) + " is not k/(m-1)");
  out.difference = Angle(*diff);
  out.k = k.get_num().get_si();
  out.checked -= 2;
  return out;
}

// ---------------------------------------------------------------------------
// Fibers of p.

enum class FiberCase { singleton, case_i, case_ii };

inline const char* to_string(FiberCase c) {
  switch (c) {
    case FiberCase::singleton: return "singleton";
    case FiberCase::case_i: return "case_i";
    case FiberCase::case_ii: return "case_ii";
  }
  return "?";
}

struct PMapEntry {
  Angle tau;
  Angle p_value;
  int fiber_id = -1;
  FiberCase fiber_case = FiberCase::singleton;
};

inline PMapEntry make_entry(const FundamentalArcs& a, const Angle& tau) { return {tau, compute_p(a, tau)}; }

struct FiberOptions {
  double b_end = 1e-13;
  double window = 1e-12;
  double landing_tol = 1e-4;
  double return_tol = 1e-5;
  int return_budget = 16;
  /// Traces are compared for disjointness above this potential.
  double disjoint_floor = 1e-6;
};

struct Fiber {
  Angle p_value;
  std::vector<Angle> angles;
  FiberCase fiber_case = FiberCase::singleton;
  std::vector<cplx> landings;
  double landing_spread = 0.0;
  int return_time = -1;  // n with P^{rn}(z) back at an earlier image
  double return_residual = INFINITY;
  bool disjoint = true;
};

struct FiberReport {
  std::vector<PMapEntry> entries;
  std::vector<Fiber> fibers;
  std::vector<std::string> violations;
  bool pass() const { return violations.empty(); }
};

namespace angle_map_detail {

/// Side-tagged duals across one gap: a right-tagged lower end and a
/// left-tagged upper end with different itineraries and equal p.
inline bool dual_pair(const FundamentalArcs& a, const Angle& x, const Angle& y) {
  const Angle& lo = x.side() == Side::right ? x : y;
  const Angle& hi = x.side() == Side::right ? y : x;
  if (lo.side() != Side::right || hi.side() != Side::left || same_point(lo, hi)) return false;
  LambdaVerdict vl = membership(a, lo), vh = membership(a, hi);
  if (!vl.member() || !vh.member() || *vl.digits == *vh.digits) return false;
  // Nothing of Lambda strictly between: extend_p is constant across.
  mpq_class l = a.lift(lo.value()), h = a.lift(hi.value());
  if (h <= l) return false;
  for (int i = 1; i <= 7; ++i) {
    Angle mid(l + (h - l) * mpq_class(i, 8));
    if (membership(a, mid).member()) return false;
  }
  return true;
}

inline bool polylines_cross(const RayTrace& s, const RayTrace& t, double floor) {
  for (std::size_t i = 0; i + 1 < s.samples.size(); ++i) {
    if (s.samples[i + 1].potential < floor) break;
    for (std::size_t j = 0; j + 1 < t.samples.size(); ++j) {
      if (t.samples[j + 1].potential < floor) break;
      double u;
      if (segments_intersect(s.samples[i].point, s.samples[i + 1].point, t.samples[j].point, t.samples[j + 1].point, &u))
        return true;
    }
  }
  return false;
}

}  // namespace angle_map_detail

/// Groups entries by exact p value (fibers sorted by p) and checks each
/// multi-element fiber: a dual side-tagged pair is case (i); anything else is
/// case (ii) and needs disjoint traces, a common landing point and a landing
/// point whose P^r-orbit returns.
inline FiberReport fiber_classify(const FundamentalArcs& a, std::vector<PMapEntry> entries, const Renormalization& ren,
                                  const FiberOptions& fo = {}) {
  FiberReport rep;
  std::map<mpq_class, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < entries.size(); ++i) groups[entries[i].p_value.value()].push_back(i);
  int id = 0;
  for (const auto& [pv, idx] : groups) {
    Fiber f;
    f.p_value = Angle(pv);
    for (auto i : idx) f.angles.push_back(entries[i].tau);
    std::sort(f.angles.begin(), f.angles.end());
    f.angles.erase(std::unique(f.angles.begin(), f.angles.end()), f.angles.end());
    if (f.angles.size() == 1) {
      f.fiber_case = FiberCase::singleton;
    } else if (f.angles.size() == 2 && angle_map_detail::dual_pair(a, f.angles[0], f.angles[1])) {
      f.fiber_case = FiberCase::case_i;
    } else {
      f.fiber_case = FiberCase::case_ii;
      TraceOptions opt = ren.trace_options(-1);
      opt.window = fo.window;
      opt.landing_tol = fo.landing_tol;
      std::vector<RayTrace> traces;
      std::string where = "fiber p = " + f.p_value.to_string();
      try {
        for (const auto& t : f.angles)
          traces.push_back(trace_ray(ren.poly, t, std::max(4.0, asymptotic_level(ren.poly)), fo.b_end, opt));
      } catch (const Error& e) {
        rep.violations.push_back(where + ": trace failed: " + e.what());
      }
      if (traces.size() == f.angles.size()) {
        for (const auto& t : traces) {
          if (!t.landing) {
            rep.violations.push_back(where + ": ray " + t.angle.to_string() + " has no landing estimate");
            continue;
          }
          f.landings.push_back(t.landing->point);
        }
        for (std::size_t i = 0; i < traces.size(); ++i)
          for (std::size_t j = i + 1; j < traces.size(); ++j)
            if (angle_map_detail::polylines_cross(traces[i], traces[j], fo.disjoint_floor)) f.disjoint = false;
        if (!f.disjoint) rep.violations.push_back(where + ": traced rays intersect");
        if (f.landings.size() == traces.size()) {
          for (auto z : f.landings) f.landing_spread = std::max(f.landing_spread, std::abs(z - f.landings[0]));
          if (f.landing_spread > fo.landing_tol) rep.violations.push_back(where + ": landing points differ");
          std::vector<cplx> orbit{f.landings[0]};
          for (int n = 1; n <= fo.return_budget && f.return_time < 0; ++n) {
            orbit.push_back(apply_iterate(ren.poly, orbit.back(), ren.r));
            for (std::size_t k = 0; k + 1 < orbit.size(); ++k) {
              double res = std::abs(orbit.back() - orbit[k]);
              if (res < fo.return_tol) {
                f.return_time = n;
                f.return_residual = res;
                break;
              }
            }
          }
          if (f.return_time < 0) rep.violations.push_back(where + ": landing point not preperiodic within budget");
        }
      }
    }
    for (auto i : idx) {
      entries[i].fiber_id = id;
      entries[i].fiber_case = f.fiber_case;
    }
    rep.fibers.push_back(std::move(f));
    ++id;
  }
  rep.entries = std::move(entries);
  return rep;
}

// ---------------------------------------------------------------------------
// Numeric membership from the equipotential nest.

struct NumericOptions {
  /// Angles closer than this to a gap endpoint of level <= depth are
  /// reported boundary_uncertain.
  double boundary_tol = 1e-9;
};

/// Distance from tau to the nearest point of sigma_D^{-k}{gap_lo, gap_hi},
/// k <= depth.
inline double gap_endpoint_distance(const FundamentalArcs& a, const Angle& tau, int depth) {
  double best = INFINITY;
  mpq_class x = tau.value();
  double scale = 1.0;
  for (int k = 0; k <= depth; ++k) {
    for (const mpq_class& e : {a.gap_lo, a.gap_hi}) {
      mpq_class d = frac(x - e);
      double dd = std::min(d.get_d(), 1.0 - d.get_d());
      best = std::min(best, dd * scale);
    }
    x = frac(x * a.D);
    scale /= static_cast<double>(a.D);
  }
  return best;
}

/// Membership read off a traced ray: tau is a depth-k member when its point
/// below level b0/D^k lies in the depth-k nest domain. The digit at step k is
/// the arc holding the external angle of P^{rk} of the crossing at level k+1,
/// a point of W*_1.
inline LambdaVerdict membership_numeric(const Renormalization& ren, const FundamentalArcs& a, const Angle& tau, int depth,
                                        const NumericOptions& no = {}) {
  if (depth < 0) throw Error(ErrorKind::Domain, "depth must be non-negative");
  LambdaVerdict out;
  out.angle = tau;
  if (tau.side() == Side::none && gap_endpoint_distance(a, tau, depth) < no.boundary_tol) {
    out.verdict = Verdict::boundary_uncertain;
    return out;
  }
  auto nest = ren.nest(depth);
  TraceOptions opt = ren.trace_options(depth);
  const double b_end = nest->level(depth) * (1.0 - nest->delta) * 0.9;
  const double b_start = std::max(4.0, asymptotic_level(ren.poly));

  auto verdict_of = [&](const RayTrace& t) {
    LambdaVerdict v;
    v.angle = t.angle;
    int reached = static_cast<int>(t.nest_crossings.size());
    if (reached <= depth) {
      v.excluded_step = reached;
      return v;
    }
    v.verdict = Verdict::member;
    DigitStream ds;
    for (int k = 0; k < depth; ++k) {
      cplx w = apply_iterate(ren.poly, t.nest_crossings[k + 1].point, ren.r * k);
      double theta = external_angle(ren.poly, w, 1e-12);
      mpq_class x = a.lift(mpq_class(theta));
      int j = angle_map_detail::arc_of(a, x, Side::none);
      if (j < 0) {
        v.verdict = Verdict::boundary_uncertain;
        return v;
      }
      ds.preperiod.push_back(j);
    }
    v.digits = ds;
    return v;
  };

  try {
    RayTrace t = trace_ray(ren.poly, tau, b_start, b_end, opt);
    if (t.status != RayStatus::crashed_unresolved) return verdict_of(t);
    // An untagged crash: both one-sided rays must agree.
    LambdaVerdict l = verdict_of(trace_ray(ren.poly, tau.with_side(Side::left), b_start, b_end, opt));
    LambdaVerdict r = verdict_of(trace_ray(ren.poly, tau.with_side(Side::right), b_start, b_end, opt));
    if (l.verdict == r.verdict && l.excluded_step == r.excluded_step && l.digits == r.digits) {
      l.angle = tau;
      return l;
    }
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::Precision && e.kind() != ErrorKind::CrashUnresolved) throw;
  }
  out.verdict = Verdict::boundary_uncertain;
  return out;
}

/// Whether an exact verdict and a depth-limited numeric one agree. A numeric
/// member at depth K only certifies the first K + 1 levels, so it matches an
/// exact exclusion after step K; otherwise verdicts, exclusion steps and the
/// digit prefix must match.
inline bool verdicts_agree(const LambdaVerdict& exact, const LambdaVerdict& numeric, int depth) {
  if (numeric.member() && !exact.member()) return exact.excluded_step > depth;
  if (exact.verdict != numeric.verdict) return false;
  if (!exact.member()) return exact.excluded_step == numeric.excluded_step;
  if (!numeric.digits) return true;
  const auto& prefix = numeric.digits->preperiod;
  for (std::size_t n = 0; n < prefix.size(); ++n)
    if (prefix[n] != exact.digits->at(n)) return false;
  return true;
}

}  // namespace polyray
