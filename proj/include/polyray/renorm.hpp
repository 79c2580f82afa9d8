#pragma once

// Detection of a renormalization f = P^r : W_1 -> W_0 whose domains are
// components of equipotentials (disconnected filled Julia set), together with
// component addresses, crash pairs and the crossing-level check.

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "polyray/angle.hpp"
#include "polyray/geometry.hpp"
#include "polyray/potential.hpp"
#include "polyray/ray.hpp"

namespace polyray {

/// |grad u_P(z)| from the escape iterate, d^{-n} |(P^n)'(z)| / |P^n(z)|.
inline double green_gradient(const Polynomial& p, cplx z) {
  const int d = p.degree();
  const double r_esc = escape_radius(p);
  IterateJet jet{z, 1.0, 0.0, true};
  double scale = 1.0;
  for (int n = 0; n < kDefaultBudget; ++n) {
    if (std::abs(jet.value) > std::max(1e6, r_esc)) return scale * std::abs(jet.d1) / std::abs(jet.value);
    cplx v, p1, p2;
    p.eval(jet.value, v, p1, p2);
    jet.d1 *= p1;
    jet.value = v;
    scale /= d;
  }
  return 0.0;
}

inline double potential_or_zero(const Polynomial& p, cplx z) {
  GreenEstimate g = green_potential(p, z, 1e-14);
  return g.escaped ? g.value : 0.0;
}

struct BaseLevel {
  double b0 = 0.0;
  /// min over c escaping, k <= 60, of |b0 - u(c)/d^k| / (u(c)/d^k).
  double margin = 0.0;
};

/// Smallest relative distance from b to the critical levels u(c)/d^k, k <= 60.
inline double critical_margin(int d, const std::vector<CriticalDatum>& escaping, double b) {
  double margin = INFINITY;
  for (const auto& c : escaping) {
    double lv = c.potential.value;
    for (int k = 0; k <= 60; ++k, lv /= d) margin = std::min(margin, std::abs(b - lv) / lv);
  }
  return margin;
}

/// b0 = 0.7 min u(c), nudged by at most 1% to stay 1e-3 away from every
/// critical level.
inline BaseLevel choose_base_level(const Polynomial& p, const std::vector<CriticalDatum>& escaping) {
  if (escaping.empty()) throw Error(ErrorKind::NotDisconnected, "no escaping critical point; K_P is connected");
  double umin = INFINITY;
  for (const auto& c : escaping) umin = std::min(umin, c.potential.value);
  const double base = 0.7 * umin;
  const int d = p.degree();
  BaseLevel best{base, critical_margin(d, escaping, base)};
  if (best.margin >= 1e-3) return best;
  for (int i = 1; i <= 100; ++i) {
    for (double sign : {1.0, -1.0}) {
      double b = base * (1.0 + sign * 1e-4 * i);
      double m = critical_margin(d, escaping, b);
      if (m >= 1e-3) return {b, m};
      if (m > best.margin) best = {b, m};
    }
  }
  return best;
}

/// A point of {u = beta} on the boundary of the component of {u < beta}
/// containing q, found by marching from q in a fixed direction and bisecting
/// at the first exit.
inline cplx level_exit_point(const Polynomial& p, cplx q, double beta, cplx direction = 1.0) {
  const double scale = escape_radius(p);
  direction /= std::abs(direction);
  cplx prev = q, cur = q;
  double u = potential_or_zero(p, q);
  if (u >= beta) throw Error(ErrorKind::Domain, "point is not below the requested level");
  for (int it = 0; it < 200000; ++it) {
    double h;
    if (u <= 0.0) {
      h = 1e-3 * scale;
    } else {
      double g = green_gradient(p, cur);
      h = g > 0.0 ? 0.5 * (beta - u) / g : 1e-3 * scale;
      h = std::clamp(h, 1e-13 * scale, 0.05 * scale);
    }
    prev = cur;
    cur += h * direction;
    u = potential_or_zero(p, cur);
    if (u >= beta) break;
  }
  if (u < beta) throw Error(ErrorKind::Precision, "level march did not leave the component");
  cplx lo = prev, hi = cur;
  for (int i = 0; i < 100; ++i) {
    cplx mid = 0.5 * (lo + hi);
    if (potential_or_zero(p, mid) < beta) lo = mid; else hi = mid;
    if (std::abs(hi - lo) < 1e-15 * scale) break;
  }
  return hi;
}

/// Boundary polygon of the component of {u < beta} containing q.
inline Polyline component_polygon(const Polynomial& p, cplx q, double beta, int n_points) {
  return equipotential_component(p, beta, level_exit_point(p, q, beta), n_points);
}

struct LevelComponent {
  Polyline boundary;
  double min_angle = 0.0;
  std::vector<cplx> points;  // the P^{-J}(w) preimages inside
};

namespace renorm_detail {

/// A point of K_P: a fixed point of P.
inline cplx point_in_filled_julia(const Polynomial& p) {
  auto k = p.coeffs();
  k[1] -= 1.0;
  auto fixed = polynomial_roots(k, 1e-10);
  return fixed.front().point;
}

/// Vertices sitting on a separatrix below a critical point of u have an
/// ambiguous angle and may fail to resolve; they are skipped.
inline double min_vertex_angle(const Polynomial& p, const Polyline& poly) {
  double best = 1.0;
  int resolved = 0;
  for (auto z : poly) {
    try {
      best = std::min(best, external_angle(p, z));
      ++resolved;
    } catch (const Error&) {
    }
  }
  if (resolved == 0) throw Error(ErrorKind::Precision, "no boundary vertex has a resolvable external angle");
  return best;
}

}  // namespace renorm_detail

/// All components of {u < beta}, in canonical order by the smallest external
/// angle among their boundary vertices.
///
/// Every component maps by some P^J onto the connected set {u < d^J beta}
/// (d^J beta above every critical potential), so each contains a point of
/// P^{-J}(w) for w in K_P; the preimages are grouped by component polygon.
inline std::vector<LevelComponent> enumerate_components(const Polynomial& p, double beta, int n_points = 128) {
  auto crit = classify_criticals(p);
  const int d = p.degree();
  double umax = 0.0;
  for (const auto& c : crit.escaping) umax = std::max(umax, c.potential.value);
  int J = 0;
  for (double lv = beta; lv <= umax * (1.0 + 1e-9); lv *= d) ++J;
  if (J > 8) throw Error(ErrorKind::Domain, "component enumeration limited to 8 preimage generations");

  std::vector<cplx> pts{crit.bounded.empty() ? renorm_detail::point_in_filled_julia(p) : crit.bounded.front().point};
  for (int j = 0; j < J; ++j) {
    std::vector<cplx> next;
    for (auto w : pts)
      for (const auto& r : p.preimages(w)) next.push_back(r.point);
    pts = std::move(next);
  }

  std::vector<LevelComponent> out;
  std::vector<bool> used(pts.size(), false);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (used[i]) continue;
    LevelComponent comp;
    comp.boundary = component_polygon(p, pts[i], beta, n_points);
    for (std::size_t j = 0; j < pts.size(); ++j)
      if (!used[j] && (j == i || point_in_polygon(comp.boundary, pts[j]))) {
        used[j] = true;
        comp.points.push_back(pts[j]);
      }
    comp.min_angle = renorm_detail::min_vertex_angle(p, comp.boundary);
    out.push_back(std::move(comp));
  }
  std::sort(out.begin(), out.end(), [](const LevelComponent& a, const LevelComponent& b) { return a.min_angle < b.min_angle; });
  return out;
}

namespace renorm_detail {

/// enumerate_components is deterministic and expensive; results are memoised
/// per process, keyed on the coefficients and the level.
inline const std::vector<LevelComponent>& cached_components(const Polynomial& p, double beta) {
  using Key = std::pair<std::vector<std::pair<double, double>>, double>;
  static std::map<Key, std::vector<LevelComponent>> cache;
  static std::mutex mutex;
  Key key;
  for (auto c : p.coeffs()) key.first.emplace_back(c.real(), c.imag());
  key.second = beta;
  {
    std::lock_guard<std::mutex> lock(mutex);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
  }
  auto comps = enumerate_components(p, beta);
  std::lock_guard<std::mutex> lock(mutex);
  return cache.emplace(std::move(key), std::move(comps)).first->second;
}

}  // namespace renorm_detail

struct ComponentAddress {
  std::vector<int> indices;
  /// Deepest level reached; smaller than the requested depth when z escapes.
  int cutoff = 0;
};

/// Index of the component of {u < b0/d^k} containing z, k = 0..depth.
inline ComponentAddress component_address(const Polynomial& p, cplx z, double b0, int depth) {
  ComponentAddress out;
  const int d = p.degree();
  const double u = potential_or_zero(p, z);
  auto crit = classify_criticals(p);
  for (int k = 0; k <= depth; ++k) {
    double beta = b0 / std::pow(static_cast<double>(d), k);
    if (u >= beta) break;
    out.cutoff = k;
    if (crit.escaping.empty()) {
      out.indices.push_back(0);
      continue;
    }
    const auto& comps = renorm_detail::cached_components(p, beta);
    int idx = -1;
    for (std::size_t i = 0; i < comps.size(); ++i)
      if (point_in_polygon(comps[i].boundary, z)) {
        idx = static_cast<int>(i);
        break;
      }
    if (idx < 0) throw Error(ErrorKind::Precision, "point not inside any enumerated component");
    out.indices.push_back(idx);
  }
  return out;
}

/// Recognises the critical-value angle as a rational with denominator at most
/// 1e4 (error below 1e-11), then picks the two preimage rays that reach c.
inline CrashPair crash_angle_pair(const Polynomial& p, const CriticalDatum& c) {
  if (!c.potential.escaped) throw Error(ErrorKind::Domain, "crash pair requires an escaping critical point");
  const int d = p.degree();
  const double uc = c.potential.value;
  double theta_v = external_angle(p, p(c.point), 1e-14);
  mpq_class q = best_rational(theta_v, 10000);
  double err = std::abs(std::remainder(q.get_d() - theta_v, 1.0));
  bool exact = err < 1e-11;

  std::vector<std::pair<double, int>> dist;
  std::vector<double> approx;
  for (int j = 0; j < d; ++j) {
    double a = (theta_v + j) / d;
    approx.push_back(a);
    Angle tau = exact ? Angle(mpq_class((q + j) / d)) : Angle(best_rational(a, 1000000000L));
    TraceOptions opt;
    RayTrace t = trace_ray(p, tau, std::max(4.0, asymptotic_level(p)), uc * (1.0 + 1e-6), opt);
    dist.emplace_back(std::abs(t.samples.back().point - c.point), j);
  }
  std::sort(dist.begin(), dist.end());
  if (!(dist[1].first < 0.1 * (d > 2 ? dist[2].first : INFINITY)) || dist[1].first > 0.05 * escape_radius(p))
    throw Error(ErrorKind::Precision, "ambiguous crash-pair selection");
  int j1 = std::min(dist[0].second, dist[1].second), j2 = std::max(dist[0].second, dist[1].second);

  CrashPair out;
  out.critical_point = c.point;
  out.level = uc;
  out.exact = exact;
  out.theta1_approx = approx[j1];
  out.theta2_approx = approx[j2];
  if (exact) {
    out.theta1 = Angle(mpq_class((q + j1) / d));
    out.theta2 = Angle(mpq_class((q + j2) / d));
  } else {
    out.theta1 = Angle(best_rational(approx[j1], 1000000000L));
    out.theta2 = Angle(best_rational(approx[j2], 1000000000L));
  }
  return out;
}

struct Renormalization {
  Polynomial poly;
  int r = 1;
  int m = 2;
  long D = 0;
  double b0 = 0.0;
  double b0_margin = 0.0;
  std::vector<int> kf_address;
  std::vector<CriticalDatum> escaping;
  std::vector<CriticalDatum> interior_criticals;
  cplx c0;
  std::vector<CrashPair> crash_pairs;
  Polyline w0;  // boundary of W* (level b0)
  Polyline w1;  // boundary of W*_1 (level b0/D)
  std::vector<int> probe_counts;

  double level(int k) const { return b0 / std::pow(static_cast<double>(D), k); }

  std::shared_ptr<const NestSpec> nest(int depth, double delta = 0.05) const {
    auto n = std::make_shared<NestSpec>();
    n->b0 = b0;
    n->D = D;
    n->r = r;
    n->depth = depth;
    n->w0 = w0;
    n->w1 = w1;
    n->delta = delta;
    return n;
  }

  /// Trace options with the crash context and nest of this renormalization.
  TraceOptions trace_options(int nest_depth) const {
    TraceOptions opt;
    opt.crash_pairs = crash_pairs;
    opt.escaping = escaping;
    if (nest_depth >= 0) opt.nest = nest(nest_depth);
    return opt;
  }
};

struct RenormOptions {
  int polygon_points = 4096;
  int address_depth = 3;
  int period_budget = 64;
  int probes = 20;
  std::optional<double> b0_override;
};

/// Builds the renormalization around the first bounded critical point c0.
inline Renormalization build_renormalization(const Polynomial& p, const RenormOptions& options = {}) {
  auto crit = classify_criticals(p);
  if (crit.escaping.empty()) throw Error(ErrorKind::NotDisconnected, "no escaping critical point; K_P is connected");
  if (crit.bounded.empty()) throw Error(ErrorKind::NoBoundedCritical, "every critical point escapes; K_P is a Cantor set");
  const int d = p.degree();

  Renormalization ren;
  ren.poly = p;
  ren.escaping = crit.escaping;
  ren.c0 = crit.bounded.front().point;
  BaseLevel base = choose_base_level(p, crit.escaping);
  if (options.b0_override) base = {*options.b0_override, critical_margin(d, crit.escaping, *options.b0_override)};
  ren.b0 = base.b0;
  ren.b0_margin = base.margin;

  ren.w0 = component_polygon(p, ren.c0, ren.b0, options.polygon_points);

  // Period: first return of the level-0 component of c0.
  cplx z = ren.c0;
  ren.r = 0;
  for (int j = 1; j <= options.period_budget; ++j) {
    z = p(z);
    if (point_in_polygon(ren.w0, z)) {
      ren.r = j;
      break;
    }
  }
  if (ren.r == 0) throw Error(ErrorKind::PeriodBudgetExceeded, "component orbit of c0 did not close within budget");
  ren.D = 1;
  for (int j = 0; j < ren.r; ++j) ren.D *= d;

  // Degree of P^r on W_1 as the product of the degrees of P along the
  // component chain V_j (level b0/d^{r-j}, containing P^j(c0)).
  ren.m = 1;
  z = ren.c0;
  for (int j = 0; j < ren.r; ++j) {
    double beta = ren.b0 / std::pow(static_cast<double>(d), ren.r - j);
    Polyline vj = component_polygon(p, z, beta, std::max(512, options.polygon_points / 4));
    int local = 1;
    for (const auto& c : crit.bounded)
      if (point_in_polygon(vj, c.point)) {
        local += c.multiplicity;
        bool seen = false;
        for (const auto& e : ren.interior_criticals) seen = seen || std::abs(e.point - c.point) < 1e-12;
        if (!seen) ren.interior_criticals.push_back(c);
      }
    ren.m *= local;
    z = p(z);
  }
  if (ren.m >= ren.D) throw Error(ErrorKind::ModelMismatch, "degree m must be below D");

  ren.w1 = component_polygon(p, ren.c0, ren.level(1), options.polygon_points);

  // Properness: every probe w in W_0 has exactly m preimages under P^r in W_1.
  int found = 0;
  for (int i = 0; found < options.probes && i < 40 * options.probes; ++i) {
    cplx v = ren.w0[(static_cast<std::size_t>(i) * 7919u) % ren.w0.size()];
    double t = 0.15 + 0.6 * ((i * 37) % 97) / 97.0;
    cplx w = ren.c0 + t * (v - ren.c0);
    if (!point_in_polygon(ren.w0, w) || distance_to_polygon(ren.w0, w) < 1e-3) continue;
    std::vector<cplx> pre{w};
    for (int j = 0; j < ren.r; ++j) {
      std::vector<cplx> next;
      for (auto y : pre)
        for (const auto& root : p.preimages(y))
          for (int k = 0; k < root.multiplicity; ++k) next.push_back(root.point);
      pre = std::move(next);
    }
    int count = 0;
    for (auto y : pre) count += point_in_polygon(ren.w1, y) ? 1 : 0;
    ren.probe_counts.push_back(count);
    ++found;
    if (count != ren.m)
      throw Error(ErrorKind::ModelMismatch, "probe point has " + std::to_string(count) + " preimages in W_1, expected m = " +
                                                std::to_string(ren.m));
  }

  ren.kf_address = component_address(p, ren.c0, ren.b0, options.address_depth).indices;
  for (const auto& c : crit.escaping) ren.crash_pairs.push_back(crash_angle_pair(p, c));
  return ren;
}

inline nlohmann::json to_json(const Renormalization& ren) {
  nlohmann::json pairs = nlohmann::json::array();
  for (const auto& c : ren.crash_pairs) {
    nlohmann::json j = {{"theta1", c.theta1.rational_string()}, {"theta2", c.theta2.rational_string()}};
    if (!c.exact) j["exact"] = false;
    pairs.push_back(j);
  }
  return {{"r", ren.r},
          {"m", ren.m},
          {"D", ren.D},
          {"b0", ray_detail::fmt17(ren.b0)},
          {"kf_address", ren.kf_address},
          {"crash_pairs", pairs}};
}

struct P2Report {
  bool pass = true;
  int rays_checked = 0;
  int rays_meeting_w1 = 0;
  int max_crossings = 0;
  double worst_level_error = 0.0;  // relative, at the crossings of the boundaries
  double b_star = INFINITY;
  double b0_margin = 0.0;
  std::vector<std::string> violations;
};

namespace renorm_detail {

struct Crossing {
  cplx point;
  double potential;
};

inline std::vector<Crossing> polyline_crossings(const RayTrace& t, const Polyline& poly) {
  std::vector<Crossing> out;
  for (std::size_t i = 0; i + 1 < t.samples.size(); ++i) {
    const auto& a = t.samples[i];
    const auto& b = t.samples[i + 1];
    for (std::size_t k = 0; k < poly.size(); ++k) {
      double s;
      if (segments_intersect(a.point, b.point, poly[k], poly[(k + 1) % poly.size()], &s)) {
        cplx x = a.point + s * (b.point - a.point);
        bool dup = false;
        for (const auto& c : out) dup = dup || std::abs(c.point - x) < 1e-7;
        if (!dup) out.push_back({x, a.potential + s * (b.potential - a.potential)});
      }
    }
  }
  return out;
}

}  // namespace renorm_detail

/// Crossing discipline of rays against the nest boundaries: every crossing
/// of the boundary of W*_1 (resp. W*) sits at b0/D (resp. b0), at most once
/// per ray, and b0 keeps its margin from the critical levels.
inline P2Report verify_p2(const Renormalization& ren, const std::vector<Angle>& sample_rays, double level_tol = 1e-2) {
  P2Report rep;
  rep.b0_margin = critical_margin(ren.poly.degree(), ren.escaping, ren.b0);
  double umin = INFINITY;
  for (const auto& c : ren.escaping) umin = std::min(umin, c.potential.value);
  if (!(ren.b0 < umin) || rep.b0_margin < 1e-3) {
    rep.pass = false;
    rep.violations.push_back("b0 margin violated: b0 = " + ray_detail::fmt17(ren.b0) + ", margin = " +
                             ray_detail::fmt17(rep.b0_margin));
  }
  TraceOptions opt = ren.trace_options(-1);
  for (const auto& tau : sample_rays) {
    RayTrace t = trace_ray(ren.poly, tau, std::max(4.0, asymptotic_level(ren.poly)), ren.level(1) * 0.5, opt);
    ++rep.rays_checked;
    auto c1 = renorm_detail::polyline_crossings(t, ren.w1);
    auto c0 = renorm_detail::polyline_crossings(t, ren.w0);
    if (!c1.empty()) ++rep.rays_meeting_w1;
    rep.max_crossings = std::max<int>(rep.max_crossings, static_cast<int>(std::max(c1.size(), c0.size())));
    if (c1.size() > 1 || c0.size() > 1) {
      rep.pass = false;
      rep.violations.push_back("ray " + tau.to_string() + " crosses a nest boundary more than once");
    }
    auto check = [&](const std::vector<renorm_detail::Crossing>& cs, double expected, const char* which) {
      for (const auto& c : cs) {
        double e = std::abs(c.potential - expected) / expected;
        rep.worst_level_error = std::max(rep.worst_level_error, e);
        rep.b_star = std::min(rep.b_star, c.potential);
        if (e > level_tol) {
          rep.pass = false;
          rep.violations.push_back("ray " + tau.to_string() + " crosses " + which + " at potential " +
                                   ray_detail::fmt17(c.potential));
        }
      }
    };
    check(c1, ren.level(1), "the boundary of W*_1");
    check(c0, ren.b0, "the boundary of W*");
  }
  return rep;
}

}  // namespace polyray
