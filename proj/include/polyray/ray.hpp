#pragma once

// External rays by Newton continuation down a potential ladder, crash
// handling at critical points of the Green function, nest-crossing records
// and landing estimates; equipotential components by angular continuation.

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "polyray/angle.hpp"
#include "polyray/geometry.hpp"
#include "polyray/newton.hpp"
#include "polyray/potential.hpp"

namespace polyray {

/// Two angles whose rays meet at an escaping critical point.
struct CrashPair {
  Angle theta1;
  Angle theta2;
  cplx critical_point;
  double level = 0.0;  // u_P(critical_point)
  bool exact = true;   // false when the critical-value angle was not recognised as rational
  double theta1_approx = 0.0;
  double theta2_approx = 0.0;
};

/// Equipotential nest W_0 = W*, W_1 = W*_1 for nest-crossing records.
struct NestSpec {
  double b0 = 0.0;
  long D = 0;
  int r = 1;
  int depth = 8;
  Polyline w0;
  Polyline w1;
  double delta = 0.05;

  double level(int k) const { return b0 / std::pow(static_cast<double>(D), k); }
};

inline cplx apply_iterate(const Polynomial& p, cplx z, int n) {
  for (int i = 0; i < n; ++i) z = p(z);
  return z;
}

/// Whether a point at potential below level(k) lies in the depth-k nest
/// domain: z in W_0 for k = 0, otherwise P^{rj}(z) in W_1 for j < k.
inline bool in_nest(const Polynomial& p, const NestSpec& nest, cplx z, int k) {
  if (k == 0) return point_in_polygon(nest.w0, z);
  for (int j = 0; j < k; ++j) {
    if (!point_in_polygon(nest.w1, z)) return false;
    z = apply_iterate(p, z, nest.r);
  }
  return true;
}

struct TraceOptions {
  int substeps = 4;
  double window = 1e-4;
  double landing_tol = 1e-4;
  Precision precision = Precision::binary64;
  std::vector<CrashPair> crash_pairs;
  /// Escaping critical points; used to classify Newton failures that were not
  /// predicted by exact crash-pair arithmetic.
  std::vector<CriticalDatum> escaping;
  std::shared_ptr<const NestSpec> nest;
  std::vector<double> extra_levels;
  /// Angular offset, in units of sigma^k at the crash, used to pass a crash
  /// on the tagged side.
  double side_epsilon = 1e-8;
  /// Relative half-width of the potential window traced with the offset.
  double crash_window = 1e-2;
  double alpha_max = 0.2;
  int max_subdivisions = 48;
};

struct RaySample {
  double potential = 0.0;
  cplx point;
};

struct CrashRecord {
  double potential = 0.0;
  cplx point;
  int depth = 0;  // P^depth(point) is the critical point
};

struct NestCrossing {
  int k = 0;
  double potential = 0.0;
  cplx point;
};

struct Landing {
  cplx point;
  double tail_diameter = 0.0;
};

enum class RayStatus { landed, crashed_unresolved, truncated };

inline const char* to_string(RayStatus s) {
  switch (s) {
    case RayStatus::landed: return "landed";
    case RayStatus::crashed_unresolved: return "crashed_unresolved";
    case RayStatus::truncated: return "truncated";
  }
  return "truncated";
}

struct RayTrace {
  Angle angle;
  std::vector<RaySample> samples;
  std::optional<CrashRecord> crash;
  std::vector<NestCrossing> nest_crossings;
  std::optional<Landing> landing;
  RayStatus status = RayStatus::truncated;

  /// Sample whose potential is closest to b in relative terms.
  const RaySample& nearest(double b) const {
    if (samples.empty()) throw Error(ErrorKind::InsufficientDepth, "empty trace");
    std::size_t best = 0;
    double err = INFINITY;
    for (std::size_t i = 0; i < samples.size(); ++i) {
      double e = std::abs(std::log(samples[i].potential / b));
      if (e < err) { err = e; best = i; }
    }
    return samples[best];
  }
};

/// Centroid and diameter of the samples at or below `window`.
inline Landing land_estimate(const RayTrace& trace, double window) {
  std::vector<cplx> tail;
  for (const auto& s : trace.samples)
    if (s.potential <= window) tail.push_back(s.point);
  if (tail.empty()) throw Error(ErrorKind::InsufficientDepth, "no samples below the landing window");
  cplx sum = 0.0;
  for (auto z : tail) sum += z;
  Landing out;
  out.point = sum / static_cast<double>(tail.size());
  for (std::size_t i = 0; i < tail.size(); ++i)
    for (std::size_t j = i + 1; j < tail.size(); ++j) out.tail_diameter = std::max(out.tail_diameter, std::abs(tail[i] - tail[j]));
  return out;
}

namespace ray_detail {

/// sigma_d^n(tau) in turns, cached per n.
class OrbitAngles {
 public:
  OrbitAngles(const Angle& tau, int d) : tau_(tau), d_(d) {}
  double operator()(int n) {
    auto it = cache_.find(n);
    if (it != cache_.end()) return it->second;
    double v = tau_.sigma_power_double(d_, static_cast<unsigned>(n));
    cache_.emplace(n, v);
    return v;
  }

 private:
  Angle tau_;
  int d_;
  std::map<int, double> cache_;
};

struct CrashEvent {
  double level = 0.0;
  int k = 0;
  const CrashPair* pair = nullptr;
};

inline std::vector<CrashEvent> crash_events(const Angle& tau, int d, double b_end, const TraceOptions& opt) {
  std::vector<CrashEvent> out;
  for (const auto& pair : opt.crash_pairs) {
    if (!pair.exact) continue;
    mpq_class t = tau.value();
    double lv = pair.level;
    for (int k = 0; lv > b_end && k < 200; ++k) {
      if (t == pair.theta1.value() || t == pair.theta2.value()) out.push_back({lv, k, &pair});
      t = frac(t * d);
      lv /= d;
    }
  }
  std::sort(out.begin(), out.end(), [](const CrashEvent& a, const CrashEvent& b) { return a.level > b.level; });
  return out;
}

inline std::string fmt17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

}  // namespace ray_detail

/// Crash point at depth k: the solution of P^k(z) = c near `seed`.
inline cplx crash_point(const Polynomial& p, cplx critical, int k, cplx seed) {
  if (k == 0) return critical;
  NewtonResult nr = solve_iterate(p, k, critical, seed, Precision::binary64, 200);
  if (!nr.converged) throw Error(ErrorKind::Precision, "could not locate precritical crash point");
  return nr.z;
}

/// Traces R_tau from potential b_start down to b_end.
///
/// Levels follow b_start 2^{-j/substeps} together with the nest levels, the
/// crash windows and any extra levels; each level solves
/// P^n(z) = B^{-1}(exp(d^n b + 2 pi i sigma^n tau)) by Newton from the previous
/// point, with n the smallest lift into the asymptotic regime. A step whose
/// Kantorovich alpha is too large is split geometrically. Crashes are found by
/// exact angle arithmetic against the crash pairs: an untagged ray stops just
/// above the crash, a tagged ray passes it with the angle shifted to its side
/// and resumes the exact angle below.
inline RayTrace trace_ray(const Polynomial& p, const Angle& tau, double b_start, double b_end,
                          const TraceOptions& opt = {}) {
  if (!(b_start > b_end && b_end > 0.0)) throw Error(ErrorKind::Domain, "trace_ray requires b_start > b_end > 0");
  if (opt.substeps < 1) throw Error(ErrorKind::Domain, "substeps must be at least 1");
  const int d = p.degree();
  const double level = asymptotic_level(p);
  const double w = opt.crash_window;

  RayTrace trace;
  trace.angle = tau;

  auto events = ray_detail::crash_events(tau, d, b_end, opt);
  if (tau.side() == Side::none && events.size() > 1) events.resize(1);

  std::vector<double> levels;
  const double b_top = std::max(b_start, level);
  for (int j = 0;; ++j) {
    double b = b_top * std::pow(2.0, -static_cast<double>(j) / opt.substeps);
    if (b <= b_end) break;
    levels.push_back(b);
  }
  levels.push_back(b_start);
  levels.push_back(b_end);
  auto add_level = [&](double b) {
    if (b < b_start && b > b_end) levels.push_back(b);
  };
  for (double b : opt.extra_levels) add_level(b);
  if (opt.nest)
    for (int k = 0; k <= opt.nest->depth; ++k) {
      add_level(opt.nest->level(k));
      add_level(opt.nest->level(k) * (1.0 - opt.nest->delta));
    }
  for (const auto& e : events) {
    add_level(e.level * (1.0 + w));
    add_level(e.level * (1.0 - w));
  }
  std::sort(levels.begin(), levels.end(), std::greater<>());
  levels.erase(std::unique(levels.begin(), levels.end(),
                           [](double a, double b) { return std::abs(a - b) <= 1e-14 * std::abs(a); }),
               levels.end());

  ray_detail::OrbitAngles orbit(tau, d);
  const ray_detail::CrashEvent* active = nullptr;
  double side_sign = tau.side() == Side::left ? -1.0 : 1.0;

  auto attempt = [&](double b, cplx seed, NewtonResult& nr) {
    int n = lift_count(d, b, level);
    double ang = orbit(n);
    if (active) ang -= side_sign * opt.side_epsilon * std::pow(static_cast<double>(d), n - active->k);
    cplx target = bottcher_target(p, wrap_turns(ang), std::pow(static_cast<double>(d), n) * b);
    nr = solve_iterate(p, n, target, seed, opt.precision);
    return nr.certified(seed, opt.alpha_max);
  };

  cplx z = bottcher_target(p, tau.to_double(), b_top);
  if (b_top <= b_start) trace.samples.push_back({b_top, z});
  double b_cur = b_top;

  auto near_escaping_level = [&](double b, CrashRecord& rec) {
    for (const auto& c : opt.escaping) {
      double lv = c.potential.value;
      for (int k = 0; lv > b * 0.5 && k < 200; ++k, lv /= d)
        if (std::abs(b - lv) <= 2.0 * w * lv) {
          rec.potential = lv;
          rec.depth = k;
          try {
            rec.point = crash_point(p, c.point, k, z);
          } catch (const Error&) {
            rec.point = z;
          }
          return true;
        }
    }
    return false;
  };

  for (std::size_t li = 0; li < levels.size(); ++li) {
    double b_next = levels[li];
    if (b_next >= b_cur) continue;

    // Crash handling is decided on the segment (b_cur, b_next).
    active = nullptr;
    for (const auto& e : events) {
      if (b_cur <= e.level * (1.0 + w) * (1.0 + 1e-12) && b_next >= e.level * (1.0 - w) * (1.0 - 1e-12)) {
        if (tau.side() == Side::none) {
          CrashRecord rec;
          rec.potential = e.level;
          rec.depth = e.k;
          rec.point = crash_point(p, e.pair->critical_point, e.k, z);
          trace.crash = rec;
          trace.status = RayStatus::crashed_unresolved;
          return trace;
        }
        active = &e;
        if (!trace.crash) {
          CrashRecord rec;
          rec.potential = e.level;
          rec.depth = e.k;
          rec.point = crash_point(p, e.pair->critical_point, e.k, z);
          trace.crash = rec;
        }
      }
    }

    std::vector<double> pending{b_next};
    while (!pending.empty()) {
      double target_b = pending.back();
      NewtonResult nr;
      if (attempt(target_b, z, nr)) {
        z = nr.z;
        b_cur = target_b;
        pending.pop_back();
        if (b_cur <= b_start * (1.0 + 1e-15)) trace.samples.push_back({b_cur, z});
        continue;
      }
      if (static_cast<int>(pending.size()) > opt.max_subdivisions) {
        CrashRecord rec;
        if (tau.side() == Side::none && near_escaping_level(target_b, rec)) {
          trace.crash = rec;
          trace.status = RayStatus::crashed_unresolved;
          return trace;
        }
        std::ostringstream msg;
        msg << "ray " << tau.to_string() << " stalled at potential " << ray_detail::fmt17(target_b)
            << " (n = " << lift_count(d, target_b, level) << ", |P^n'| = " << nr.derivative_abs
            << ", alpha = " << nr.alpha << ")";
        throw Error(ErrorKind::Precision, msg.str());
      }
      pending.push_back(std::sqrt(b_cur * target_b));
    }
  }

  if (opt.nest) {
    const NestSpec& nest = *opt.nest;
    for (int k = 0; k <= nest.depth; ++k) {
      double bk = nest.level(k);
      if (bk > b_start || bk * (1.0 - nest.delta) < b_end) break;
      const RaySample& probe = trace.nearest(bk * (1.0 - nest.delta));
      if (!in_nest(p, nest, probe.point, k)) break;
      const RaySample& at = trace.nearest(bk);
      trace.nest_crossings.push_back({k, at.potential, at.point});
    }
  }

  bool deep = false;
  for (const auto& s : trace.samples) deep = deep || s.potential <= opt.window;
  if (deep) {
    trace.landing = land_estimate(trace, opt.window);
    trace.status = trace.landing->tail_diameter < opt.landing_tol ? RayStatus::landed : RayStatus::truncated;
  } else {
    trace.status = RayStatus::truncated;
  }
  return trace;
}

/// Convenience overload with the ladder resolution as the only option.
inline RayTrace trace_ray(const Polynomial& p, const Angle& tau, double b_start, double b_end, int substeps) {
  TraceOptions opt;
  opt.substeps = substeps;
  return trace_ray(p, tau, b_start, b_end, opt);
}

inline nlohmann::json to_json(const RayTrace& t) {
  using nlohmann::json;
  json samples = json::array();
  for (const auto& s : t.samples) samples.push_back({ray_detail::fmt17(s.potential), s.point.real(), s.point.imag()});
  json crossings = json::array();
  for (const auto& c : t.nest_crossings)
    crossings.push_back({c.k, ray_detail::fmt17(c.potential), c.point.real(), c.point.imag()});
  json crash = nullptr;
  if (t.crash)
    crash = {{"potential", ray_detail::fmt17(t.crash->potential)},
             {"point", {t.crash->point.real(), t.crash->point.imag()}},
             {"depth", t.crash->depth}};
  json landing = nullptr;
  if (t.landing)
    landing = {{"point", {t.landing->point.real(), t.landing->point.imag()}},
               {"tail_diameter", t.landing->tail_diameter}};
  return {{"angle", t.angle.rational_string()},
          {"side", to_string(t.angle.side())},
          {"samples", samples},
          {"crash", crash},
          {"nest_crossings", crossings},
          {"landing", landing},
          {"status", to_string(t.status)}};
}

/// Levels u_P(c)/d^k near b, for refusing non-smooth equipotentials.
inline bool near_critical_level(const Polynomial& p, double b, double rel = 1e-3) {
  const int d = p.degree();
  for (const auto& c : classify_criticals(p).escaping) {
    for (double lv = c.potential.value; lv > 0.5 * b; lv /= d)
      if (std::abs(b - lv) <= rel * lv) return true;
  }
  return false;
}

/// Closed curve {u_P = b} through (a polished copy of) seed.
///
/// The curve is followed through its Böttcher angle: with n lifting b into
/// the asymptotic regime, points solve P^n(z) = B^{-1}(exp(d^n b + 2 pi i phi))
/// while phi increases; the curve closes after phi advances by the degree of
/// P^n on the component. The result has n_points vertices equally spaced in
/// phi, counterclockwise.
inline Polyline equipotential_component(const Polynomial& p, double b, cplx seed, int n_points) {
  if (n_points < 3) throw Error(ErrorKind::Domain, "n_points must be at least 3");
  if (!(b > 0.0)) throw Error(ErrorKind::Domain, "level must be positive");
  GreenEstimate g = green_potential(p, seed);
  if (!g.escaped || std::abs(g.value - b) > 1e-6 * std::max(b, 1e-300))
    throw Error(ErrorKind::Domain, "seed is not on the requested equipotential");
  if (near_critical_level(p, b))
    throw Error(ErrorKind::CriticalLevel, "equipotential level is within 1e-3 of a critical potential");

  const int d = p.degree();
  const double level = asymptotic_level(p);
  const int n = lift_count(d, b, level);
  const double top = std::pow(static_cast<double>(d), n) * b;
  const double max_chord = 0.05 * escape_radius(p);

  LogBottcher lb = log_bottcher(p, iterate_jet(p, seed, n).value);
  const double phi0 = lb.log_b.imag() / kTwoPi;

  auto solve_at = [&](double phi, cplx from, NewtonResult& nr) {
    cplx target = bottcher_target(p, wrap_turns(phi), top);
    nr = solve_iterate(p, n, target, from);
    return nr.converged;
  };

  NewtonResult nr;
  if (!solve_at(phi0, seed, nr)) throw Error(ErrorKind::Precision, "could not polish equipotential seed");
  const cplx z0 = nr.z;

  std::vector<std::pair<double, cplx>> dense{{0.0, z0}};
  double adv = 0.0, h = 1e-3;
  cplx z = z0;
  const double max_turns = std::pow(static_cast<double>(d), n) + 0.5;
  int closing = 0;
  while (true) {
    double next = adv + h;
    int next_int = static_cast<int>(std::floor(next));
    bool crosses = next_int > static_cast<int>(std::floor(adv)) && next_int >= 1;
    if (crosses) next = next_int;
    if (solve_at(phi0 + next, z, nr) && nr.certified(z, 0.1) && std::abs(nr.z - z) <= max_chord) {
      z = nr.z;
      adv = next;
      dense.emplace_back(adv, z);
      if (crosses && std::abs(z - z0) <= 1e-8 * std::max(1.0, std::abs(z0))) {
        closing = next_int;
        break;
      }
      h = std::min(h * 1.5, 0.02);
    } else {
      h *= 0.5;
      if (h < 1e-14) throw Error(ErrorKind::Precision, "equipotential continuation stalled");
    }
    if (adv > max_turns) throw Error(ErrorKind::Precision, "equipotential did not close");
  }

  Polyline out;
  out.reserve(n_points);
  std::size_t cursor = 0;
  for (int i = 0; i < n_points; ++i) {
    double a = static_cast<double>(closing) * i / n_points;
    while (cursor + 1 < dense.size() && dense[cursor + 1].first <= a) ++cursor;
    cplx from = dense[cursor].second;
    cplx pt = from;
    if (a > dense[cursor].first) {
      if (!solve_at(phi0 + a, from, nr)) throw Error(ErrorKind::Precision, "equipotential resampling failed");
      pt = nr.z;
    }
    out.push_back(pt);
  }
  if (signed_area(out) < 0.0) std::reverse(out.begin(), out.end());
  return out;
}

}  // namespace polyray
