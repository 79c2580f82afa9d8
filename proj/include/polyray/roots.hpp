#pragma once

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <complex>
#include <sstream>
#include <vector>

#include "polyray/error.hpp"

namespace polyray {

using cplx = std::complex<double>;

struct Root {
  cplx point;
  int multiplicity = 1;
};

namespace roots_detail {

inline cplx horner(const std::vector<cplx>& coeffs, cplx z, cplx* derivative = nullptr) {
  cplx v = 0.0, dv = 0.0;
  for (auto it = coeffs.rbegin(); it != coeffs.rend(); ++it) {
    dv = dv * z + v;
    v = v * z + *it;
  }
  if (derivative) *derivative = dv;
  return v;
}

}  // namespace roots_detail

/// Roots of sum coeffs[i] z^i via companion-matrix eigenvalues and a single
/// Newton polish per root. Roots closer than merge_tol are merged and counted
/// with multiplicity.
inline std::vector<Root> polynomial_roots(std::vector<cplx> coeffs, double merge_tol = 1e-8,
                                          double residual_tol = 1e-8) {
  while (coeffs.size() > 1 && coeffs.back() == cplx(0.0)) coeffs.pop_back();
  const int n = static_cast<int>(coeffs.size()) - 1;
  if (n < 1) return {};
  const cplx lead = coeffs.back();

  std::vector<cplx> raw;
  if (n == 1) {
    raw.push_back(-coeffs[0] / lead);
  } else {
    Eigen::MatrixXcd companion = Eigen::MatrixXcd::Zero(n, n);
    for (int i = 1; i < n; ++i) companion(i, i - 1) = 1.0;
    for (int i = 0; i < n; ++i) companion(i, n - 1) = -coeffs[i] / lead;
    Eigen::ComplexEigenSolver<Eigen::MatrixXcd> solver(companion, false);
    if (solver.info() != Eigen::Success) throw Error(ErrorKind::RootFinding, "companion eigen solver failed");
    for (int i = 0; i < n; ++i) raw.push_back(solver.eigenvalues()(i));
  }

  double scale = 0.0;
  for (const auto& c : coeffs) scale = std::max(scale, std::abs(c / lead));
  scale = std::max(scale, 1.0);

  for (auto& z : raw) {
    cplx d;
    cplx v = roots_detail::horner(coeffs, z, &d);
    if (std::abs(d) > 0.0) {
      cplx step = v / d;
      if (std::abs(step) < 1e-3 * (1.0 + std::abs(z))) z -= step;
    }
  }

  // Cluster.
  std::vector<Root> out;
  std::vector<bool> used(raw.size(), false);
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (used[i]) continue;
    cplx sum = raw[i];
    int count = 1;
    used[i] = true;
    for (std::size_t j = i + 1; j < raw.size(); ++j) {
      if (!used[j] && std::abs(raw[j] - raw[i]) < merge_tol * (1.0 + std::abs(raw[i]))) {
        used[j] = true;
        sum += raw[j];
        ++count;
      }
    }
    out.push_back({sum / static_cast<double>(count), count});
  }

  std::vector<double> bad;
  for (const auto& r : out) {
    double res = std::abs(roots_detail::horner(coeffs, r.point) / lead);
    double allowed = residual_tol * std::pow(scale * (1.0 + std::abs(r.point)), n);
    if (!(res <= allowed)) bad.push_back(res);
  }
  if (!bad.empty()) {
    std::ostringstream msg;
    msg << "root finder did not converge; residuals:";
    for (double b : bad) msg << ' ' << b;
    throw Error(ErrorKind::RootFinding, msg.str());
  }
  std::sort(out.begin(), out.end(), [](const Root& a, const Root& b) {
    if (a.point.real() != b.point.real()) return a.point.real() < b.point.real();
    return a.point.imag() < b.point.imag();
  });
  return out;
}

}  // namespace polyray
