#pragma once

// Exact rational scalar type used by the symbolic half of the pipeline,
// plus the conversions that bridge it to the floating-point solver side.

#include <boost/multiprecision/cpp_int.hpp>

#include <cmath>
#include <stdexcept>
#include <string>

namespace polyitp {

using Int = boost::multiprecision::cpp_int;
using Rational = boost::multiprecision::cpp_rational;

// Exact dyadic value of a finite double. No rounding happens here; the
// mantissa is transcribed verbatim so that later rounding steps see the
// solver output unchanged.
inline Rational rational_from_double(double x) {
  if (!std::isfinite(x)) {
    throw std::invalid_argument("rational_from_double: non-finite value");
  }
  Rational r;
  r = x;  // boost performs this conversion exactly
  return r;
}

inline double rational_to_double(const Rational& r) {
  return r.convert_to<double>();
}

inline Rational make_rational(const Int& num, const Int& den) {
  if (den == 0) throw std::invalid_argument("make_rational: zero denominator");
  return Rational(num) / Rational(den);
}

// round(|r| * 10^c) with ties away from zero, on the absolute value.
inline Int round_half_away_from_zero(const Rational& r) {
  Rational a = r < 0 ? Rational(-r) : r;
  Rational a2 = a * 2;
  Int twice = numerator(a2) / denominator(a2);  // floor(2a)
  Int fl = numerator(a) / denominator(a);       // floor(a)
  // fractional part >= 1/2  <=>  floor(2a) >= 2*floor(a) + 1
  Int mag = (twice >= 2 * fl + 1) ? fl + 1 : fl;
  return r < 0 ? Int(-mag) : mag;
}

inline Int pow10(unsigned c) {
  Int p = 1;
  for (unsigned i = 0; i < c; ++i) p *= 10;
  return p;
}

inline std::string to_string(const Rational& r) {
  return r.str();
}

// Parses "123", "-4/7" or "0.25" (decimals are read exactly).
inline Rational parse_rational(const std::string& s) {
  auto slash = s.find('/');
  if (slash != std::string::npos) {
    Int num(s.substr(0, slash));
    Int den(s.substr(slash + 1));
    return make_rational(num, den);
  }
  auto dot = s.find('.');
  if (dot != std::string::npos) {
    std::string digits = s.substr(0, dot) + s.substr(dot + 1);
    unsigned places = static_cast<unsigned>(s.size() - dot - 1);
    return make_rational(Int(digits), pow10(places));
  }
  return Rational(Int(s));
}

}  // namespace polyitp
