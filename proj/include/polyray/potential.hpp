#pragma once

// Green's potential, Böttcher coordinate and external angles in the basin of
// infinity.

#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include "polyray/error.hpp"
#include "polyray/newton.hpp"
#include "polyray/polynomial.hpp"
#include "polyray/roots.hpp"

namespace polyray {

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;
inline constexpr int kDefaultBudget = 2048;
inline constexpr double kEscapeCut = 1e8;

struct GreenEstimate {
  double value = 0.0;
  double error_bound = 0.0;
  int iterations = 0;
  bool escaped = false;
};

/// u_P(z) = lim d^{-n} log|P^n(z)|.
///
/// Iterates until |P^n(z)| exceeds the escape cut and the tail bound
/// d^{-n} 2S / ((d-1)|P^n z|^2) on log|B/z| drops below tol (S is the sum of
/// the non-leading coefficient moduli). If the budget runs out after the orbit
/// left the escape radius the estimate is still returned as escaped, with the
/// looser bound it had reached.
inline GreenEstimate green_potential(const Polynomial& p, cplx z, double tol = 1e-12,
                                     int budget = kDefaultBudget, double escape_cut = kEscapeCut) {
  if (!(tol > 0.0)) throw Error(ErrorKind::Domain, "tol must be positive");
  const int d = p.degree();
  const double s = p.tail_norm();
  const double r_esc = escape_radius(p);
  GreenEstimate est;
  double scale = 1.0;  // d^{-n}
  for (int n = 0; n <= budget; ++n) {
    if (!std::isfinite(z.real()) || !std::isfinite(z.imag()))
      throw Error(ErrorKind::Overflow, "non-finite orbit point in green_potential");
    double r = std::abs(z);
    if (r > r_esc) {
      est.escaped = true;
      est.iterations = n;
      est.value = scale * std::log(r);
      if (s / (r * r) <= 0.5)
        est.error_bound = scale * 2.0 * s / ((d - 1) * r * r);
      else
        est.error_bound = scale * 2.0 * std::log(r_esc);
      if (r >= escape_cut && est.error_bound <= tol) return est;
      if (r > 1e150) return est;
    }
    if (n == budget) break;
    z = p(z);
    scale /= d;
  }
  if (!est.escaped) est.iterations = budget;
  return est;
}

struct CriticalDatum {
  cplx point;
  int multiplicity = 1;
  GreenEstimate potential;
};

/// Roots of P' with multiplicities and their potentials.
inline std::vector<CriticalDatum> critical_points(const Polynomial& p, int budget = kDefaultBudget) {
  std::vector<CriticalDatum> out;
  for (const auto& r : polynomial_roots(p.derivative_coeffs(), 1e-8, 1e-8)) {
    CriticalDatum c;
    c.point = r.point;
    c.multiplicity = r.multiplicity;
    c.potential = green_potential(p, r.point, 1e-14, budget);
    out.push_back(c);
  }
  return out;
}

struct CriticalClassification {
  std::vector<CriticalDatum> escaping;
  std::vector<CriticalDatum> bounded;
  /// Bounded verdicts are "did not escape within budget".
  int budget = 0;
};

inline CriticalClassification classify_criticals(const Polynomial& p, int budget = kDefaultBudget) {
  if (budget <= 0) throw Error(ErrorKind::Domain, "budget must be positive");
  CriticalClassification out;
  out.budget = budget;
  for (auto& c : critical_points(p, budget)) (c.potential.escaped ? out.escaping : out.bounded).push_back(c);
  return out;
}

/// Radius beyond which the Böttcher product converges with principal branches
/// and B(z)/z is within a few percent of 1.
inline double bottcher_radius(const Polynomial& p) {
  return std::max({2.0 * escape_radius(p), std::sqrt(10.0 * p.tail_norm()), 4.0});
}

/// Potentials at or above this level are in the asymptotic regime.
inline double asymptotic_level(const Polynomial& p) { return std::log(bottcher_radius(p)) + 0.2; }

struct LogBottcher {
  cplx log_b;   // log B(z); imaginary part continuous with arg z
  cplx dlog_b;  // d/dz log B(z)
  bool branch_ok = true;
};

/// log B(z) = log z + sum_k d^{-(k+1)} Log(P(z_k) / z_k^d) with principal
/// logarithms. branch_ok is false if any factor has argument beyond pi/2.
inline LogBottcher log_bottcher(const Polynomial& p, cplx z) {
  const int d = p.degree();
  const auto& a = p.coeffs();
  LogBottcher out;
  out.log_b = std::log(z);
  cplx ratio = 1.0 / z;  // z_k' / z_k
  out.dlog_b = ratio;
  double weight = 1.0;
  cplx zk = z;
  for (int k = 0; k < 4096; ++k) {
    cplx u = 1.0 / zk;
    // f = P(z)/z^d and g = z P'(z) / (d z^d), both in powers of 1/z.
    cplx f = 1.0, g = 1.0;
    for (int i = 0; i + 2 <= d; ++i) {
      cplx term = a[i] * std::pow(u, d - i);
      f += term;
      g += term * (static_cast<double>(i) / d);
    }
    weight /= d;
    cplx lf = std::log(f);
    if (std::abs(lf.imag()) > std::numbers::pi / 2) out.branch_ok = false;
    out.log_b += weight * lf;
    cplx zp_over_p = static_cast<double>(d) * g / f;  // z_k P'(z_k) / P(z_k)
    out.dlog_b += weight * (zp_over_p - static_cast<double>(d)) * ratio;
    ratio *= zp_over_p;
    if (std::abs(f - 1.0) < 1e-18) break;
    zk = p(zk);
    if (!std::isfinite(zk.real()) || !std::isfinite(zk.imag()) || std::abs(zk) > 1e150) break;
  }
  return out;
}

/// B_P(z) for z in the asymptotic regime.
inline cplx bottcher(const Polynomial& p, cplx z) { return std::exp(log_bottcher(p, z).log_b); }

inline double wrap_turns(double t) {
  t -= std::floor(t);
  if (t >= 1.0) t = 0.0;
  return t;
}

/// The point w with B_P(w) = exp(b + 2 pi i tau), by Newton from the guess
/// exp(b + 2 pi i tau). Requires e^b at or beyond the Böttcher radius.
inline cplx bottcher_target(const Polynomial& p, double tau, double b) {
  const double r_big = bottcher_radius(p);
  if (!(std::exp(b) >= r_big * (1.0 - 1e-12)))
    throw Error(ErrorKind::Precision, "bottcher_target level below the asymptotic regime");
  const cplx target(b, kTwoPi * tau);
  cplx w = std::exp(target);
  for (int it = 0; it < 50; ++it) {
    LogBottcher lb = log_bottcher(p, w);
    if (!lb.branch_ok) throw Error(ErrorKind::Precision, "Böttcher branch ambiguity; raise R_big");
    cplx f = lb.log_b - target;
    double im = std::remainder(f.imag(), kTwoPi);
    f = cplx(f.real(), im);
    if (std::abs(f) < 1e-15) return w;
    w -= f / lb.dlog_b;
    if (!(std::abs(w) > 0.5 * r_big)) throw Error(ErrorKind::Precision, "Böttcher Newton left the asymptotic regime");
  }
  LogBottcher lb = log_bottcher(p, w);
  cplx f = lb.log_b - target;
  if (std::abs(cplx(f.real(), std::remainder(f.imag(), kTwoPi))) < 1e-12) return w;
  throw Error(ErrorKind::Precision, "Böttcher Newton did not converge");
}

/// Smallest n >= 0 with d^n b >= level.
inline int lift_count(int d, double b, double level) {
  int n = 0;
  double v = b;
  while (v < level) {
    v *= d;
    ++n;
    if (n > 200) throw Error(ErrorKind::Precision, "potential too small to lift into the asymptotic regime");
  }
  return n;
}

/// arg(B_P(z)) / 2pi in turns.
///
/// Points in the asymptotic regime use the Böttcher product directly. Deeper
/// points are walked up their own ray: with n chosen so that P^n(z) is
/// asymptotic, successive points solve P^n(z') = B^{-1}(B(P^n z) e^{d^n (b'-b)})
/// at increasing levels b', n dropping by one whenever d^{n-1} b' is
/// asymptotic; the angle read off at n = 0 is the angle of z.
inline double external_angle(const Polynomial& p, cplx z, double tol = 1e-12,
                             Precision precision = Precision::binary64) {
  GreenEstimate est = green_potential(p, z, std::min(tol, 1e-12));
  if (!est.escaped) throw Error(ErrorKind::Domain, "external_angle requires an escaping point");
  const int d = p.degree();
  const double level = asymptotic_level(p);
  const double r_big = bottcher_radius(p);

  auto angle_of = [&](cplx w) {
    LogBottcher lb = log_bottcher(p, w);
    if (!lb.branch_ok) throw Error(ErrorKind::Precision, "angular step beyond pi/2; raise working precision");
    return wrap_turns(lb.log_b.imag() / kTwoPi);
  };

  if (std::abs(z) >= r_big && est.value >= level) return angle_of(z);

  double b = est.value;
  int n = lift_count(d, b, level);
  IterateJet jet = iterate_jet(p, z, n);
  double theta = angle_of(jet.value);
  cplx cur = z;
  const int substeps = 8;
  double ratio = std::pow(2.0, 1.0 / substeps);
  while (n > 0) {
    double next = b * ratio;
    cplx target = bottcher_target(p, theta, std::pow(static_cast<double>(d), n) * next);
    NewtonResult nr = solve_iterate(p, n, target, cur, precision);
    if (!nr.certified(cur, 0.25)) {
      ratio = std::sqrt(ratio);
      if (ratio - 1.0 < 1e-9) {
        // Next to a critical point of u the two upward branches share the
        // target; step over it and accept whichever branch Newton picks.
        next = b * 1.01;
        target = bottcher_target(p, theta, std::pow(static_cast<double>(d), n) * next);
        // The nearest converged candidate is the continuation; symmetric
        // seeds may otherwise slide to a distant preimage.
        bool ok = false;
        NewtonResult best;
        for (double nudge : {0.0, 1e-7, 1e-4, 1e-2}) {
          nudge *= std::max(1.0, std::abs(cur));
          for (cplx dir : {cplx(0.0, 1.0), cplx(1.0, 0.0), cplx(0.0, -1.0), cplx(-1.0, 0.0)}) {
            NewtonResult cand = solve_iterate(p, n, target, cur + nudge * dir, precision, 200);
            if (cand.converged && std::abs(cand.z - cur) <= 0.05 * r_big &&
                (!ok || std::abs(cand.z - cur) < std::abs(best.z - cur))) {
              best = cand;
              ok = true;
            }
            if (nudge == 0.0) break;
          }
        }
        if (!ok) throw Error(ErrorKind::Precision, "upward ray walk stalled");
        nr = best;
        ratio = 1.01;
      } else {
        continue;
      }
    }
    cur = nr.z;
    b = next;
    ratio = std::min(std::pow(2.0, 1.0 / substeps), ratio * ratio);
    while (n > 0 && std::pow(static_cast<double>(d), n - 1) * b >= level) {
      --n;
      double lower = angle_of(iterate_jet(p, cur, n).value);
      double mismatch = std::remainder(lower * d - theta, 1.0);
      if (std::abs(mismatch) > 1e-7) throw Error(ErrorKind::Precision, "inconsistent angle while unwinding");
      theta = lower;
    }
  }
  return theta;
}

}  // namespace polyray
