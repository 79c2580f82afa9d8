#pragma once

// Planar polygon helpers on closed polylines (last vertex joins the first).

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

namespace polyray {

using cplx = std::complex<double>;
using Polyline = std::vector<cplx>;

/// Winding number of a closed polyline around p by angle summation.
inline int winding_number(const Polyline& poly, cplx p) {
  if (poly.size() < 3) return 0;
  double total = 0.0;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    cplx a = poly[i] - p;
    cplx b = poly[(i + 1) % poly.size()] - p;
    total += std::arg(b / a);
  }
  return static_cast<int>(std::lround(total / (2.0 * std::numbers::pi)));
}

/// Even-odd crossing test.
inline bool point_in_polygon(const Polyline& poly, cplx p) {
  bool inside = false;
  const std::size_t n = poly.size();
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const cplx a = poly[i], b = poly[j];
    if ((a.imag() > p.imag()) != (b.imag() > p.imag())) {
      double x = (b.real() - a.real()) * (p.imag() - a.imag()) / (b.imag() - a.imag()) + a.real();
      if (p.real() < x) inside = !inside;
    }
  }
  return inside;
}

inline double signed_area(const Polyline& poly) {
  double s = 0.0;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    cplx a = poly[i], b = poly[(i + 1) % poly.size()];
    s += a.real() * b.imag() - b.real() * a.imag();
  }
  return 0.5 * s;
}

inline double cross(cplx a, cplx b) { return a.real() * b.imag() - a.imag() * b.real(); }

/// Proper intersection of segments [p1, p2] and [q1, q2]; on success writes
/// the parameter along the first segment.
inline bool segments_intersect(cplx p1, cplx p2, cplx q1, cplx q2, double* t_out = nullptr) {
  cplx r = p2 - p1, s = q2 - q1;
  double den = cross(r, s);
  if (den == 0.0) return false;
  double t = cross(q1 - p1, s) / den;
  double u = cross(q1 - p1, r) / den;
  if (t < 0.0 || t > 1.0 || u < 0.0 || u > 1.0) return false;
  if (t_out) *t_out = t;
  return true;
}

/// Minimum distance from p to the polygon's edges.
inline double distance_to_polygon(const Polyline& poly, cplx p) {
  double best = INFINITY;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    cplx a = poly[i], b = poly[(i + 1) % poly.size()];
    cplx ab = b - a;
    double len2 = std::norm(ab);
    double t = len2 > 0.0 ? std::clamp(((p - a) * std::conj(ab)).real() / len2, 0.0, 1.0) : 0.0;
    best = std::min(best, std::abs(p - (a + t * ab)));
  }
  return best;
}

}  // namespace polyray
