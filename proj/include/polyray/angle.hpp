#pragma once

// Exact angles on the circle T = R/Z.

#include <gmpxx.h>

#include <cmath>
#include <compare>
#include <cstdint>
#include <functional>
#include <ostream>
#include <string>
#include <string_view>

#include "polyray/error.hpp"

namespace polyray {

enum class Side { none, left, right };

inline const char* to_string(Side side) {
  switch (side) {
    case Side::none: return "none";
    case Side::left: return "left";
    case Side::right: return "right";
  }
  return "none";
}

inline Side parse_side(std::string_view text) {
  if (text == "none" || text.empty()) return Side::none;
  if (text == "left") return Side::left;
  if (text == "right") return Side::right;
  throw Error(ErrorKind::Parse, "unknown side '" + std::string(text) + "'");
}

/// Fractional part in [0, 1).
inline mpq_class frac(const mpq_class& x) {
  mpz_class fl;
  mpz_fdiv_q(fl.get_mpz_t(), x.get_num_mpz_t(), x.get_den_mpz_t());
  mpq_class r = x - mpq_class(fl);
  r.canonicalize();
  return r;
}

inline mpz_class floor_of(const mpq_class& x) {
  mpz_class fl;
  mpz_fdiv_q(fl.get_mpz_t(), x.get_num_mpz_t(), x.get_den_mpz_t());
  return fl;
}

/// Exact rational number of turns in [0, 1), optionally tagged with the side
/// from which a non-smooth ray of this argument is approached.
///
/// Left means the limit of smooth rays of arguments t - eps (eps -> 0+), which
/// lie on the left-hand side when travelling inward along the ray; right is the
/// limit from t + eps.
class Angle {
 public:
  Angle() : value_(0) {}
  explicit Angle(const mpq_class& value, Side side = Side::none) : value_(frac(value)), side_(side) {}
  Angle(long num, long den, Side side = Side::none) : side_(side) {
    if (den <= 0) throw Error(ErrorKind::Domain, "angle denominator must be positive");
    value_ = frac(mpq_class(num, den));
  }
  Angle(const mpz_class& num, const mpz_class& den, Side side = Side::none) : side_(side) {
    if (den <= 0) throw Error(ErrorKind::Domain, "angle denominator must be positive");
    mpq_class q(num, den);
    q.canonicalize();
    value_ = frac(q);
  }

  const mpq_class& value() const { return value_; }
  mpz_class numerator() const { return value_.get_num(); }
  mpz_class denominator() const { return value_.get_den(); }
  Side side() const { return side_; }
  Angle with_side(Side side) const { return Angle(value_, side); }
  Angle untagged() const { return Angle(value_, Side::none); }

  double to_double() const { return value_.get_d(); }

  /// sigma_k(t) = k t mod 1; the side tag is carried along since sigma_k is
  /// orientation preserving.
  Angle sigma(const mpz_class& k) const { return Angle(mpq_class(value_ * k), side_); }
  Angle sigma(long k) const { return sigma(mpz_class(k)); }

  /// sigma_k^n(t) as a double, computed exactly before rounding.
  double sigma_power_double(long k, unsigned n) const {
    mpz_class kn;
    mpz_ui_pow_ui(kn.get_mpz_t(), static_cast<unsigned long>(k), n);
    return frac(mpq_class(value_ * kn)).get_d();
  }

  std::string to_string() const {
    std::string s = value_.get_num().get_str() + "/" + value_.get_den().get_str();
    if (side_ != Side::none) s += std::string(":") + polyray::to_string(side_);
    return s;
  }

  /// "p/q" string without the side tag.
  std::string rational_string() const { return value_.get_num().get_str() + "/" + value_.get_den().get_str(); }

  /// Parses "p/q", "p/q:left" or "p/q:right". Decimal input is rejected.
  static Angle parse(std::string_view text) {
    Side side = Side::none;
    if (auto colon = text.find(':'); colon != std::string_view::npos) {
      side = parse_side(text.substr(colon + 1));
      text = text.substr(0, colon);
    }
    auto slash = text.find('/');
    std::string num_text(text.substr(0, slash));
    std::string den_text = slash == std::string_view::npos ? "1" : std::string(text.substr(slash + 1));
    auto all_digits = [](const std::string& s) {
      if (s.empty()) return false;
      std::size_t start = (s[0] == '-') ? 1 : 0;
      if (start == s.size()) return false;
      for (std::size_t i = start; i < s.size(); ++i)
        if (s[i] < '0' || s[i] > '9') return false;
      return true;
    };
    if (!all_digits(num_text) || !all_digits(den_text))
      throw Error(ErrorKind::Parse, "angle must be an exact rational p/q, got '" + std::string(text) + "'");
    mpz_class num(num_text), den(den_text);
    if (den <= 0) throw Error(ErrorKind::Parse, "angle denominator must be positive");
    return Angle(num, den, side);
  }

  friend bool operator==(const Angle& a, const Angle& b) { return a.value_ == b.value_ && a.side_ == b.side_; }
  friend bool operator<(const Angle& a, const Angle& b) {
    if (a.value_ != b.value_) return a.value_ < b.value_;
    return static_cast<int>(a.side_) < static_cast<int>(b.side_);
  }

  friend std::ostream& operator<<(std::ostream& os, const Angle& a) { return os << a.to_string(); }

 private:
  mpq_class value_;
  Side side_ = Side::none;
};

/// Same point of the circle, ignoring side tags.
inline bool same_point(const Angle& a, const Angle& b) { return a.value() == b.value(); }

inline std::string rational_string(const mpq_class& q) {
  mpq_class c(q);
  c.canonicalize();
  return c.get_num().get_str() + "/" + c.get_den().get_str();
}

/// Best rational approximation with denominator at most max_den (continued
/// fractions); used to recognise numerically computed rational angles.
inline mpq_class best_rational(double x, long max_den) {
  long p0 = 0, q0 = 1, p1 = 1, q1 = 0;
  double v = x;
  for (int i = 0; i < 64; ++i) {
    double a = std::floor(v);
    long ai = static_cast<long>(a);
    long p2 = ai * p1 + p0;
    long q2 = ai * q1 + q0;
    if (q2 > max_den) break;
    p0 = p1; q0 = q1; p1 = p2; q1 = q2;
    double rem = v - a;
    if (rem < 1e-15) break;
    v = 1.0 / rem;
  }
  if (q1 == 0) return mpq_class(static_cast<long>(std::floor(x)));
  mpq_class r(p1, q1);
  r.canonicalize();
  return r;
}

}  // namespace polyray
