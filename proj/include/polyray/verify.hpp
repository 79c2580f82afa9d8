#pragma once

// Invariant suites shared by `verify all` and the acceptance runner. Every
// suite is deterministic for a fixed configuration.

#include <json.hpp>

#include <algorithm>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "polyray/angle_map.hpp"
#include "polyray/potential.hpp"
#include "polyray/ray.hpp"
#include "polyray/renorm.hpp"

namespace polyray {

struct SuiteResult {
  std::string name;
  bool pass = true;
  long checked = 0;
  std::vector<std::string> violations;
  double worst_residual = 0.0;
  nlohmann::json details = nlohmann::json::object();

  void fail(const std::string& what) {
    pass = false;
    if (violations.size() < 20) violations.push_back(what);
  }
  void residual(double r) { worst_residual = std::max(worst_residual, r); }
};

inline nlohmann::json to_json(const SuiteResult& s) {
  nlohmann::json j = {{"name", s.name},
                      {"pass", s.pass},
                      {"checked", s.checked},
                      {"violations", s.violations},
                      {"worst_residual", ray_detail::fmt17(s.worst_residual)}};
  if (!s.details.empty()) j["details"] = s.details;
  return j;
}

struct VerifyConfig {
  int grid_depth = 8;  // periodic grids with denominator D^K - 1 or m^K - 1
  int nest_depth = 8;
  long den_max = 1000000;
  std::uint64_t seed = 1;
  int green_points = 200;
  int push_angles = 50;
  int monotone_points = 10000;
  int gap_levels = 8;
  int cover_levels = 12;
  int cover_enumeration = 8;
  int cross_samples = 500;
  int nest_rays = 20;
  double agreement = 0.99;
};

inline nlohmann::json to_json(const VerifyConfig& c) {
  return {{"grid_depth", c.grid_depth}, {"nest_depth", c.nest_depth},       {"den_max", c.den_max},
          {"seed", c.seed},             {"green_points", c.green_points},   {"push_angles", c.push_angles},
          {"monotone_points", c.monotone_points}, {"gap_levels", c.gap_levels}, {"cover_levels", c.cover_levels},
          {"cover_enumeration", c.cover_enumeration}, {"cross_samples", c.cross_samples}, {"nest_rays", c.nest_rays}};
}

namespace verify_detail {

/// Uniform integer in [0, n) without relying on library distributions, whose
/// output is not portable across standard libraries.
inline std::uint64_t below(std::mt19937_64& rng, std::uint64_t n) { return rng() % n; }
inline double unit(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline long ipow(long b, int e) {
  long r = 1;
  for (int i = 0; i < e; ++i) r *= b;
  return r;
}

}  // namespace verify_detail

/// |u(P z) - d u(z)| <= 1e-8 max(1, d u(z)) on random escaping points.
inline SuiteResult suite_green(const Polynomial& p, const VerifyConfig& cfg, double tol = 1e-8) {
  SuiteResult s;
  s.name = "green_functional_equation";
  std::mt19937_64 rng(cfg.seed);
  const int d = p.degree();
  const double radius = 2.0 * escape_radius(p);
  int tries = 0;
  while (s.checked < cfg.green_points && tries < 100 * cfg.green_points) {
    ++tries;
    double r = radius * std::sqrt(verify_detail::unit(rng));
    double t = kTwoPi * verify_detail::unit(rng);
    cplx z = std::polar(r, t);
    GreenEstimate g = green_potential(p, z, 1e-14);
    if (!g.escaped || g.value < 1e-6) continue;
    GreenEstimate h = green_potential(p, p(z), 1e-14);
    double res = std::abs(h.value - d * g.value) / std::max(1.0, d * g.value);
    s.residual(res);
    ++s.checked;
    if (res > tol) s.fail("z = (" + ray_detail::fmt17(z.real()) + ", " + ray_detail::fmt17(z.imag()) + ")");
  }
  if (s.checked < cfg.green_points) s.fail("too few escaping sample points");
  return s;
}

/// P maps trace samples of R_tau onto the trace of R_{sigma tau} at d b.
inline SuiteResult suite_push_forward(const Polynomial& p, const TraceOptions& base, const VerifyConfig& cfg,
                                      double tol = 1e-6) {
  SuiteResult s;
  s.name = "ray_push_forward";
  std::mt19937_64 rng(cfg.seed + 1);
  const int d = p.degree();
  const double b_start = std::max(3.0, asymptotic_level(p));
  const double b_end = 1e-3;
  for (int i = 0; i < cfg.push_angles; ++i) {
    long den = 2 + static_cast<long>(verify_detail::below(rng, 199));
    Angle tau(static_cast<long>(verify_detail::below(rng, den)), den);
    try {
      RayTrace t = trace_ray(p, tau, b_start, b_end, base);
      if (t.status == RayStatus::crashed_unresolved) {
        tau = tau.with_side(Side::left);
        t = trace_ray(p, tau, b_start, b_end, base);
      }
      TraceOptions opt = base;
      for (const auto& smp : t.samples) opt.extra_levels.push_back(d * smp.potential);
      RayTrace image = trace_ray(p, tau.sigma(d), d * b_start, d * t.samples.back().potential * 0.99, opt);
      double worst = 0.0;
      for (const auto& smp : t.samples) {
        const RaySample& q = image.nearest(d * smp.potential);
        if (std::abs(q.potential / (d * smp.potential) - 1.0) > 1e-12) {
          s.fail("ray " + tau.to_string() + ": image trace has no sample at potential " + ray_detail::fmt17(d * smp.potential));
          break;
        }
        worst = std::max(worst, std::abs(p(smp.point) - q.point));
      }
      s.residual(worst);
      if (worst > tol) s.fail("ray " + tau.to_string() + ": push-forward residual " + ray_detail::fmt17(worst));
    } catch (const Error& e) {
      s.fail("ray " + tau.to_string() + ": " + e.what());
    }
    ++s.checked;
  }
  return s;
}

/// sigma_m(p(tau)) = p(sigma_D(tau)) exactly on the members of the periodic
/// grid with denominator D^K - 1.
inline SuiteResult suite_semiconjugacy(const FundamentalArcs& a, const VerifyConfig& cfg) {
  SuiteResult s;
  s.name = "exact_semiconjugacy";
  const long den = verify_detail::ipow(a.D, cfg.grid_depth) - 1;
  long members = 0;
  for (long k = 0; k < den; ++k) {
    Angle t(k, den);
    if (!membership(a, t).member()) continue;
    ++members;
    ++s.checked;
    if (!membership(a, t.sigma(a.D)).member()) {
      s.fail(t.to_string() + ": sigma_D image left Lambda");
      continue;
    }
    if (compute_p(a, t).sigma(a.m) != compute_p(a, t.sigma(a.D))) s.fail(t.to_string() + ": semiconjugacy fails");
  }
  const long expected = verify_detail::ipow(a.m, cfg.grid_depth);
  s.details["members"] = members;
  if (members != expected) s.fail("found " + std::to_string(members) + " periodic members, expected m^K = " + std::to_string(expected));
  return s;
}

/// extend_p is cyclically monotone of degree one, and constant across every
/// gap of level at most gap_levels.
inline SuiteResult suite_monotone(const FundamentalArcs& a, const VerifyConfig& cfg) {
  SuiteResult s;
  s.name = "monotone_degree_one";
  std::vector<Angle> values;
  for (long k = 0; k < cfg.monotone_points; ++k) values.push_back(extend_p(a, Angle(k, cfg.monotone_points)));
  mpq_class w = cyclic_winding(values);
  s.details["winding"] = rational_string(w);
  s.checked += cfg.monotone_points;
  if (w != 1) s.fail("winding of extend_p is " + rational_string(w));
  for (long k = 0; k < cfg.monotone_points; ++k) {
    Angle t(k, cfg.monotone_points);
    if (membership(a, t).member() && extend_p(a, t) != compute_p(a, t)) s.fail(t.to_string() + ": extend_p differs from p");
  }
  GapCheck g = check_gap_constancy(a, cfg.gap_levels + 1);
  s.details["gaps"] = g.gaps_checked;
  s.checked += g.gaps_checked;
  for (const auto& m : g.messages) s.fail(m);
  if (g.violations > 0) s.fail(std::to_string(g.violations) + " gaps with unequal one-sided values");
  return s;
}

/// p_preimage(t) is a member and p(p_preimage(t)) = t for t = k/(m^K - 1).
inline SuiteResult suite_round_trip(const FundamentalArcs& a, const VerifyConfig& cfg) {
  SuiteResult s;
  s.name = "surjectivity_round_trip";
  const long den = verify_detail::ipow(a.m, cfg.grid_depth) - 1;
  for (long k = 0; k < den; ++k) {
    Angle t(k, den);
    PPreimage pre = p_preimage(a, t);
    ++s.checked;
    if (!membership(a, pre.tau).member()) {
      s.fail(t.to_string() + ": preimage " + pre.tau.to_string() + " is not a member");
      continue;
    }
    if (compute_p(a, pre.tau) != t) s.fail(t.to_string() + ": round trip gives " + compute_p(a, pre.tau).to_string());
    if (pre.alternate && compute_p(a, *pre.alternate) != t) s.fail(t.to_string() + ": alternate preimage disagrees");
  }
  return s;
}

/// Cover measure |B| (m/D)^n exactly, cross-checked by enumeration.
inline SuiteResult suite_cover(const FundamentalArcs& a, const VerifyConfig& cfg) {
  SuiteResult s;
  s.name = "cover_measure";
  mpq_class expected = a.b_length();
  for (int n = 0; n <= cfg.cover_levels; ++n) {
    ++s.checked;
    if (level_cover_measure(a, n) != expected) s.fail("closed form differs at level " + std::to_string(n));
    if (n <= cfg.cover_enumeration) {
      auto arcs = level_cover_arcs(a, n);
      mpq_class total = 0;
      bool ordered = true;
      for (std::size_t i = 0; i < arcs.size(); ++i) {
        total += arcs[i].arc.length();
        if (i > 0 && !(arcs[i - 1].arc.hi < arcs[i].arc.lo)) ordered = false;
      }
      if (arcs.size() != static_cast<std::size_t>(verify_detail::ipow(a.m, n))) s.fail("wrong arc count at level " + std::to_string(n));
      if (!ordered) s.fail("level " + std::to_string(n) + " arcs overlap");
      if (total != expected) s.fail("enumerated measure differs at level " + std::to_string(n));
    }
    expected *= mpq_class(a.m, a.D);
  }
  s.details["measure_at_max_level"] = rational_string(level_cover_measure(a, cfg.cover_levels));
  return s;
}

/// Exact and traced membership agree; uncertain verdicts must sit within
/// 1e-9 of a gap endpoint.
inline SuiteResult suite_cross_validation(const Renormalization& ren, const FundamentalArcs& a, const VerifyConfig& cfg,
                                          double boundary_tol = 1e-9) {
  SuiteResult s;
  s.name = "numeric_cross_validation";
  std::mt19937_64 rng(cfg.seed + 2);
  const long grid = verify_detail::ipow(a.D, cfg.grid_depth) - 1;
  long agree = 0, uncertain = 0, members = 0;
  for (int i = 0; i < cfg.cross_samples; ++i) {
    Angle t;
    if (i % 2 == 0) {
      t = Angle(static_cast<long>(verify_detail::below(rng, grid)), grid);
    } else {
      long den = 1 + static_cast<long>(verify_detail::below(rng, cfg.den_max));
      t = Angle(static_cast<long>(verify_detail::below(rng, den)), den);
    }
    LambdaVerdict ex = membership(a, t);
    LambdaVerdict nu = membership_numeric(ren, a, t, cfg.nest_depth);
    ++s.checked;
    if (ex.member()) ++members;
    if (nu.verdict == Verdict::boundary_uncertain) {
      ++uncertain;
      double dist = gap_endpoint_distance(a, t, cfg.nest_depth);
      if (dist < boundary_tol) {
        ++agree;
      } else {
        s.fail(t.to_string() + ": uncertain at distance " + ray_detail::fmt17(dist) + " from the gap endpoints");
      }
      continue;
    }
    if (verdicts_agree(ex, nu, cfg.nest_depth)) {
      ++agree;
    } else {
      s.fail(t.to_string() + ": exact " + to_string(ex.verdict) + "@" + std::to_string(ex.excluded_step) + ", numeric " +
             to_string(nu.verdict) + "@" + std::to_string(nu.excluded_step));
    }
  }
  double rate = s.checked ? static_cast<double>(agree) / s.checked : 1.0;
  s.details["agreement"] = ray_detail::fmt17(rate);
  s.details["uncertain"] = uncertain;
  s.details["members"] = members;
  s.worst_residual = 1.0 - rate;
  // Isolated disagreements are tolerated up to the agreement threshold.
  s.pass = rate >= cfg.agreement;
  return s;
}

/// Classifies every fiber of p over the grid members with denominator
/// D^K - 1.
inline SuiteResult suite_fibers(const Renormalization& ren, const FundamentalArcs& a, const VerifyConfig& cfg,
                                const FiberOptions& fo = {}) {
  SuiteResult s;
  s.name = "fiber_classification";
  const long den = verify_detail::ipow(a.D, cfg.grid_depth) - 1;
  std::vector<PMapEntry> entries;
  for (long k = 0; k < den; ++k) {
    Angle t(k, den);
    if (membership(a, t).member()) entries.push_back(make_entry(a, t));
  }
  FiberReport rep = fiber_classify(a, entries, ren, fo);
  s.checked = static_cast<long>(rep.fibers.size());
  nlohmann::json multi = nlohmann::json::array();
  for (const auto& f : rep.fibers) {
    if (f.angles.size() < 2) continue;
    nlohmann::json angles = nlohmann::json::array();
    for (const auto& t : f.angles) angles.push_back(t.to_string());
    nlohmann::json j = {{"p", f.p_value.to_string()}, {"angles", angles}, {"case", to_string(f.fiber_case)}};
    if (f.fiber_case == FiberCase::case_ii) {
      j["landing_spread"] = ray_detail::fmt17(f.landing_spread);
      j["return_time"] = f.return_time;
      j["return_residual"] = ray_detail::fmt17(f.return_residual);
      if (!f.landings.empty())
        j["landing"] = {ray_detail::fmt17(f.landings[0].real()), ray_detail::fmt17(f.landings[0].imag())};
      s.residual(f.landing_spread);
    }
    multi.push_back(j);
  }
  s.details["multi_element_fibers"] = multi;
  for (const auto& v : rep.violations) s.fail(v);
  return s;
}

/// The alternative base angle: the first sigma_D-fixed member other than the
/// base angle, in increasing order.
inline std::optional<Angle> alternative_base(const FundamentalArcs& a) {
  for (long k = 0; k < a.D - 1; ++k) {
    Angle t(k, a.D - 1);
    if (t != a.base_fixed && membership(a, t).member()) return t;
  }
  return std::nullopt;
}

inline SuiteResult suite_rotation(const FundamentalArcs& a, const VerifyConfig& cfg) {
  SuiteResult s;
  s.name = "rotation_check";
  auto alt = alternative_base(a);
  if (!alt) {
    s.fail("no second fixed member angle");
    return s;
  }
  const int depth = std::min(cfg.grid_depth, 6);
  const long den = verify_detail::ipow(a.D, depth) - 1;
  std::vector<Angle> sample;
  for (long k = 0; k < den; ++k)
    if (membership(a, Angle(k, den)).member()) sample.push_back(Angle(k, den));
  try {
    RotationResult r = rotation_check(a, *alt, sample);
    s.checked = r.checked;
    s.details["alt_base"] = alt->to_string();
    s.details["difference"] = r.difference.to_string();
    s.details["k"] = r.k;
  } catch (const Error& e) {
    s.fail(e.what());
  }
  return s;
}

/// Member rays cross the nest at potentials b0/D^k (checked against the
/// potential of the crossing point), and verify_p2 sees at most one crossing
/// per ray.
inline SuiteResult suite_nest(const Renormalization& ren, const FundamentalArcs& a, const VerifyConfig& cfg,
                              double tol = 1e-9) {
  SuiteResult s;
  s.name = "nest_levels";
  const long den = verify_detail::ipow(a.D, cfg.grid_depth) - 1;
  std::vector<Angle> members;
  for (long k = 0; k < den; ++k)
    if (membership(a, Angle(k, den)).member()) members.push_back(Angle(k, den));
  std::vector<Angle> rays;
  const std::size_t want = std::min<std::size_t>(cfg.nest_rays, members.size());
  for (std::size_t i = 0; i < want; ++i) rays.push_back(members[i * members.size() / want]);
  TraceOptions opt = ren.trace_options(cfg.nest_depth);
  const double b_end = ren.level(cfg.nest_depth) * 0.9;
  for (const auto& tau : rays) {
    ++s.checked;
    try {
      RayTrace t = trace_ray(ren.poly, tau, std::max(4.0, asymptotic_level(ren.poly)), b_end, opt);
      if (static_cast<int>(t.nest_crossings.size()) != cfg.nest_depth + 1)
        s.fail("ray " + tau.to_string() + " has " + std::to_string(t.nest_crossings.size()) + " nest crossings");
      for (const auto& c : t.nest_crossings) {
        double lv = ren.level(c.k);
        double u = green_potential(ren.poly, c.point, 1e-15).value;
        double res = std::abs(u - lv) / lv;
        s.residual(res);
        if (res > tol) s.fail("ray " + tau.to_string() + " crossing " + std::to_string(c.k) + " off level by " + ray_detail::fmt17(res));
      }
    } catch (const Error& e) {
      s.fail("ray " + tau.to_string() + ": " + e.what());
    }
  }
  P2Report p2 = verify_p2(ren, rays);
  s.details["p2_pass"] = p2.pass;
  s.details["p2_max_crossings"] = p2.max_crossings;
  s.details["p2_rays_meeting_w1"] = p2.rays_meeting_w1;
  s.details["b0_margin"] = ray_detail::fmt17(p2.b0_margin);
  for (const auto& v : p2.violations) s.fail("p2: " + v);
  if (p2.max_crossings > 1) s.fail("a ray crosses the boundary of W*_1 more than once");
  return s;
}

struct VerifyReport {
  std::vector<SuiteResult> suites;
  bool pass() const {
    return std::all_of(suites.begin(), suites.end(), [](const SuiteResult& s) { return s.pass; });
  }
};

/// Builds the arcs of an r = 1 renormalization from its first crash pair.
inline FundamentalArcs arcs_for(const Renormalization& ren) {
  if (ren.crash_pairs.empty()) throw Error(ErrorKind::Domain, "renormalization has no crash pair");
  return build_arcs(ren, ren.crash_pairs.front());
}

inline VerifyReport verify_all(const Polynomial& p, const Renormalization& ren, const VerifyConfig& cfg) {
  VerifyReport rep;
  rep.suites.push_back(suite_green(p, cfg));
  rep.suites.push_back(suite_push_forward(p, ren.trace_options(-1), cfg));
  FundamentalArcs a = arcs_for(ren);
  rep.suites.push_back(suite_semiconjugacy(a, cfg));
  rep.suites.push_back(suite_monotone(a, cfg));
  rep.suites.push_back(suite_round_trip(a, cfg));
  rep.suites.push_back(suite_cover(a, cfg));
  rep.suites.push_back(suite_cross_validation(ren, a, cfg));
  rep.suites.push_back(suite_fibers(ren, a, cfg));
  rep.suites.push_back(suite_rotation(a, cfg));
  rep.suites.push_back(suite_nest(ren, a, cfg));
  return rep;
}

}  // namespace polyray
