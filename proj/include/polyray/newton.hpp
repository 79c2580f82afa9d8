#pragma once

#include <cmath>
#include <complex>

#include "polyray/double_double.hpp"
#include "polyray/polynomial.hpp"

namespace polyray {

enum class Precision { binary64, double_double };

struct NewtonResult {
  cplx z;
  bool converged = false;
  int iterations = 0;
  /// |first step| * |f''| / (2 |f'|) at the seed; small values certify the
  /// seed sits in the quadratic-convergence region of the root it converged to.
  double alpha = 0.0;
  double derivative_abs = 0.0;
  /// |first Newton step|; a root certified by a small alpha lies within about
  /// twice this distance of the seed.
  double first_step = 0.0;

  bool certified(cplx seed, double alpha_max) const {
    return converged && alpha <= alpha_max && std::abs(z - seed) <= 2.5 * first_step + 1e-14 * std::max(1.0, std::abs(seed));
  }
};

/// Solves P^n(z) = w by Newton's method from `seed`.
inline NewtonResult solve_iterate(const Polynomial& p, int n, cplx w, cplx seed,
                                  Precision precision = Precision::binary64, int max_iter = 60) {
  NewtonResult out;
  cplx z = seed;
  double prev_step = INFINITY;
  const double scale = std::max(1.0, std::abs(w));
  for (int it = 0; it < max_iter; ++it) {
    IterateJet jet = iterate_jet(p, z, n);
    if (!jet.finite || jet.d1 == cplx(0.0)) return out;
    cplx step = (jet.value - w) / jet.d1;
    if (it == 0) {
      out.alpha = std::abs(step) * std::abs(jet.d2) / (2.0 * std::abs(jet.d1));
      out.derivative_abs = std::abs(jet.d1);
      out.first_step = std::abs(step);
    }
    z -= step;
    out.iterations = it + 1;
    double s = std::abs(step);
    double residual = std::abs(jet.value - w);
    if (s <= 4e-16 * std::max(1.0, std::abs(z)) || (residual <= 1e-15 * scale) ||
        (s >= prev_step && s <= 1e-12 * std::max(1.0, std::abs(z)))) {
      out.converged = true;
      break;
    }
    prev_step = s;
  }
  if (out.converged) {
    IterateJet jet = iterate_jet(p, z, n);
    out.derivative_abs = std::abs(jet.d1);
    if (precision == Precision::double_double) {
      ComplexDD zd(z);
      ComplexDD wd(w);
      for (int it = 0; it < 3; ++it) {
        ComplexDD v, d1;
        iterate_jet(p, zd, n, v, d1);
        zd = zd - (v - wd) / d1;
      }
      z = zd.to_complex();
    }
  }
  out.z = z;
  return out;
}

}  // namespace polyray
