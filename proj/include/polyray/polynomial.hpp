#pragma once

#include <json.hpp>

#include <cmath>
#include <complex>
#include <string>
#include <vector>

#include "polyray/double_double.hpp"
#include "polyray/error.hpp"
#include "polyray/roots.hpp"

namespace polyray {

using cplx = std::complex<double>;

/// Monic centered polynomial z^d + a_{d-2} z^{d-2} + ... + a_0, d >= 2.
class Polynomial {
 public:
  Polynomial() = default;

  /// coeffs[i] multiplies z^i. Throws InvalidPolynomial unless the leading
  /// coefficient is exactly 1 and the sub-leading one exactly 0.
  explicit Polynomial(std::vector<cplx> coeffs) : coeffs_(std::move(coeffs)) {
    if (coeffs_.size() < 3) throw Error(ErrorKind::InvalidPolynomial, "degree must be at least 2");
    if (coeffs_.back() != cplx(1.0, 0.0)) throw Error(ErrorKind::InvalidPolynomial, "polynomial is not monic");
    if (coeffs_[coeffs_.size() - 2] != cplx(0.0, 0.0))
      throw Error(ErrorKind::InvalidPolynomial, "polynomial is not centered");
    for (const auto& c : coeffs_)
      if (!std::isfinite(c.real()) || !std::isfinite(c.imag()))
        throw Error(ErrorKind::InvalidPolynomial, "non-finite coefficient");
  }

  /// z^d + c.
  static Polynomial unicritical(int d, cplx c) {
    std::vector<cplx> k(d + 1, 0.0);
    k[0] = c;
    k[d] = 1.0;
    return Polynomial(std::move(k));
  }

  int degree() const { return static_cast<int>(coeffs_.size()) - 1; }
  const std::vector<cplx>& coeffs() const { return coeffs_; }

  cplx operator()(cplx z) const {
    cplx v = 0.0;
    for (auto it = coeffs_.rbegin(); it != coeffs_.rend(); ++it) v = v * z + *it;
    return v;
  }

  /// Value, first and second derivative by Horner.
  void eval(cplx z, cplx& v, cplx& d1, cplx& d2) const {
    v = 0.0; d1 = 0.0; d2 = 0.0;
    for (auto it = coeffs_.rbegin(); it != coeffs_.rend(); ++it) {
      d2 = d2 * z + 2.0 * d1;
      d1 = d1 * z + v;
      v = v * z + *it;
    }
  }

  void eval(const ComplexDD& z, ComplexDD& v, ComplexDD& d1) const {
    v = ComplexDD(cplx(0.0));
    d1 = ComplexDD(cplx(0.0));
    for (auto it = coeffs_.rbegin(); it != coeffs_.rend(); ++it) {
      d1 = d1 * z + v;
      v = v * z + ComplexDD(*it);
    }
  }

  cplx derivative(cplx z) const {
    cplx v, d1, d2;
    eval(z, v, d1, d2);
    return d1;
  }

  /// Coefficients of P'.
  std::vector<cplx> derivative_coeffs() const {
    std::vector<cplx> out;
    for (std::size_t i = 1; i < coeffs_.size(); ++i) out.push_back(coeffs_[i] * static_cast<double>(i));
    return out;
  }

  /// Sum of |a_i| over the non-leading coefficients.
  double tail_norm() const {
    double s = 0.0;
    for (std::size_t i = 0; i + 1 < coeffs_.size(); ++i) s += std::abs(coeffs_[i]);
    return s;
  }

  /// All solutions of P(z) = w.
  std::vector<Root> preimages(cplx w) const {
    auto k = coeffs_;
    k[0] -= w;
    return polynomial_roots(std::move(k), 1e-10);
  }

  friend bool operator==(const Polynomial& a, const Polynomial& b) { return a.coeffs_ == b.coeffs_; }

 private:
  std::vector<cplx> coeffs_;
};

/// P^n with first and second derivatives, for Newton solves on iterates.
struct IterateJet {
  cplx value;
  cplx d1;
  cplx d2;
  bool finite = true;
};

inline IterateJet iterate_jet(const Polynomial& p, cplx z, int n) {
  IterateJet jet{z, 1.0, 0.0, true};
  for (int k = 0; k < n; ++k) {
    cplx v, p1, p2;
    p.eval(jet.value, v, p1, p2);
    jet.d2 = p2 * jet.d1 * jet.d1 + p1 * jet.d2;
    jet.d1 = p1 * jet.d1;
    jet.value = v;
  }
  jet.finite = std::isfinite(jet.value.real()) && std::isfinite(jet.value.imag()) &&
               std::isfinite(jet.d1.real()) && std::isfinite(jet.d1.imag());
  return jet;
}

inline void iterate_jet(const Polynomial& p, const ComplexDD& z, int n, ComplexDD& value, ComplexDD& d1) {
  value = z;
  d1 = ComplexDD(cplx(1.0));
  for (int k = 0; k < n; ++k) {
    ComplexDD v, p1;
    p.eval(value, v, p1);
    d1 = p1 * d1;
    value = v;
  }
}

struct Orbit {
  std::vector<cplx> points;
  bool overflow = false;
};

/// z, P(z), ..., P^n(z). Non-finite values truncate the orbit and set the
/// overflow flag.
inline Orbit eval_orbit(const Polynomial& p, cplx z, int n) {
  Orbit orbit;
  orbit.points.reserve(static_cast<std::size_t>(n) + 1);
  orbit.points.push_back(z);
  for (int k = 0; k < n; ++k) {
    z = p(z);
    if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) {
      orbit.overflow = true;
      break;
    }
    orbit.points.push_back(z);
  }
  return orbit;
}

/// max(2, 1 + sum |a_i|): |z| >= R implies |P(z)| >= 2|z|.
inline double escape_radius(const Polynomial& p) { return std::max(2.0, 1.0 + p.tail_norm()); }

// JSON: {"degree": d, "coeffs": [[re, im], ...]} from z^0 upward.

inline nlohmann::json to_json(const Polynomial& p) {
  nlohmann::json coeffs = nlohmann::json::array();
  for (const auto& c : p.coeffs()) coeffs.push_back({c.real(), c.imag()});
  return {{"degree", p.degree()}, {"coeffs", coeffs}};
}

inline Polynomial polynomial_from_json(const nlohmann::json& j) {
  try {
    int degree = j.at("degree").get<int>();
    const auto& arr = j.at("coeffs");
    std::vector<cplx> coeffs;
    for (const auto& c : arr) {
      if (c.is_array() && c.size() == 2)
        coeffs.emplace_back(c[0].get<double>(), c[1].get<double>());
      else if (c.is_number())
        coeffs.emplace_back(c.get<double>(), 0.0);
      else
        throw Error(ErrorKind::Parse, "coefficient must be [re, im]");
    }
    if (static_cast<int>(coeffs.size()) != degree + 1)
      throw Error(ErrorKind::Parse, "coeffs length does not match degree");
    return Polynomial(std::move(coeffs));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Parse, std::string("bad polynomial JSON: ") + e.what());
  }
}

}  // namespace polyray
