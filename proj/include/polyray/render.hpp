#pragma once

// Deterministic SVG rendering of rays, equipotential nest boundaries and an
// escape-time heat layer.

#include <algorithm>
#include <cstdio>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "polyray/angle_map.hpp"
#include "polyray/potential.hpp"
#include "polyray/ray.hpp"
#include "polyray/renorm.hpp"
#include "polyray/roots.hpp"

namespace polyray {

struct RenderInput {
  Polynomial poly;
  const Renormalization* ren = nullptr;  // optional: nest boundaries
  const FundamentalArcs* arcs = nullptr; // optional: membership colouring
  std::vector<RayTrace> rays;
  int heat_cells = 48;
  int pixels = 800;
};

namespace render_detail {

inline std::string num(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", x);
  std::string s = buf;
  return s == "-0.0000" ? "0.0000" : s;
}

/// Half-width of the view: a margin around the fixed and critical points.
inline double view_extent(const Polynomial& p) {
  auto k = p.coeffs();
  k[1] -= 1.0;
  double r = 0.0;
  for (const auto& z : polynomial_roots(k, 1e-10)) r = std::max(r, std::abs(z.point));
  for (const auto& c : critical_points(p)) r = std::max(r, std::abs(c.point));
  return std::max(2.0, 1.35 * r);
}

}  // namespace render_detail

inline std::string render_svg(const RenderInput& in) {
  using render_detail::num;
  const double ext = render_detail::view_extent(in.poly);
  const double px = in.pixels;
  auto X = [&](cplx z) { return (z.real() + ext) / (2.0 * ext) * px; };
  auto Y = [&](cplx z) { return (ext - z.imag()) / (2.0 * ext) * px; };
  auto visible = [&](cplx z) { return std::abs(z.real()) <= 1.5 * ext && std::abs(z.imag()) <= 1.5 * ext; };

  std::ostringstream out;
  out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << in.pixels << "\" height=\"" << in.pixels
      << "\" viewBox=\"0 0 " << in.pixels << " " << in.pixels << "\">\n";

  // Heat layer: bands of the potential; bounded cells are black.
  out << "<g id=\"heat\" stroke=\"none\">\n";
  const int n = std::max(1, in.heat_cells);
  const double cell = px / n;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      cplx z(-ext + (j + 0.5) * 2.0 * ext / n, ext - (i + 0.5) * 2.0 * ext / n);
      GreenEstimate g = green_potential(in.poly, z, 1e-6, 256);
      int shade = 0;
      if (g.escaped) shade = std::clamp(static_cast<int>(60.0 + 50.0 * std::log2(1.0 + 8.0 * g.value)), 60, 250);
      out << "<rect x=\"" << num(j * cell) << "\" y=\"" << num(i * cell) << "\" width=\"" << num(cell) << "\" height=\""
          << num(cell) << "\" fill=\"rgb(" << shade << "," << shade << "," << std::min(255, shade + 5) << ")\"/>\n";
    }
  }
  out << "</g>\n";

  auto polygon = [&](const Polyline& poly, const char* id, const char* colour) {
    if (poly.empty()) return;
    out << "<path id=\"" << id << "\" fill=\"none\" stroke=\"" << colour << "\" stroke-width=\"1.5\" d=\"";
    for (std::size_t i = 0; i < poly.size(); ++i) out << (i ? " L" : "M") << num(X(poly[i])) << "," << num(Y(poly[i]));
    out << " Z\"/>\n";
  };
  if (in.ren) {
    out << "<g id=\"equipotentials\">\n";
    polygon(in.ren->w0, "w0", "#2e8b57");
    polygon(in.ren->w1, "w1", "#9acd32");
    out << "</g>\n";
  }

  out << "<g id=\"rays\" fill=\"none\" stroke-width=\"1\">\n";
  for (const auto& t : in.rays) {
    const char* colour = "#888888";
    if (in.arcs) colour = membership(*in.arcs, t.angle).member() ? "#d62728" : "#1f77b4";
    out << "<path class=\"ray\" data-angle=\"" << t.angle.to_string() << "\" stroke=\"" << colour << "\" d=\"";
    bool first = true;
    for (const auto& s : t.samples) {
      if (!visible(s.point)) continue;
      out << (first ? "M" : " L") << num(X(s.point)) << "," << num(Y(s.point));
      first = false;
    }
    out << "\"/>\n";
  }
  out << "</g>\n";

  out << "<g id=\"markers\">\n";
  for (const auto& t : in.rays) {
    if (t.crash && visible(t.crash->point))
      out << "<circle class=\"crash\" cx=\"" << num(X(t.crash->point)) << "\" cy=\"" << num(Y(t.crash->point))
          << "\" r=\"4\" fill=\"#ff7f0e\"/>\n";
    if (t.landing && visible(t.landing->point))
      out << "<circle class=\"landing\" cx=\"" << num(X(t.landing->point)) << "\" cy=\"" << num(Y(t.landing->point))
          << "\" r=\"2.5\" fill=\"#000000\"/>\n";
  }
  out << "</g>\n";
  out << "</svg>\n";
  return out.str();
}

}  // namespace polyray
