#pragma once

// Candidate rounding: decimal pre-rounding followed by the extended
// continued fraction expansion.
//
// Classic continued fractions simplify a ratio x1:x2 of two numbers; the
// extension below simplifies a ratio x1:...:xn of n natural numbers at a
// chosen depth d.  Depth 1 is the coarsest approximation; as d grows the
// output walks back toward the input ratio and reaches it exactly at a
// finite depth (the stabilization depth).  The rounding-validation loop
// tries d = 1, 2, ... until a rounded candidate validates or stabilization
// is reached.

#include <stdexcept>
#include <vector>

#include "polyitp/rational.hpp"

namespace polyitp {

struct RatioVec {
  std::vector<Int> entries;  // nonnegative, at least one nonzero for cfe input

  friend bool operator==(const RatioVec& a, const RatioVec& b) {
    return a.entries == b.entries;
  }
};

inline Int gcd_of(const std::vector<Int>& v) {
  Int g = 0;
  for (const Int& x : v) g = gcd(g, x);
  return g;
}

inline RatioVec divide_by_gcd(const RatioVec& x) {
  Int g = gcd_of(x.entries);
  if (g == 0) return x;
  RatioVec r;
  for (const Int& e : x.entries) r.entries.push_back(e / g);
  return r;
}

// Extended continued fraction expansion.
//  p: position of the smallest nonzero entry (first such on ties)
//  a_i = floor(x_i / x_p); depth 1 returns a in lowest terms
//  otherwise recurse on the remainder vector (which keeps x_p at slot p)
//  and reconstruct y_i = a_i r'_p + r'_i (i != p), y_p = r'_p
inline RatioVec cfe(const RatioVec& x, unsigned depth) {
  if (depth == 0) throw std::invalid_argument("cfe: depth must be positive");
  const size_t n = x.entries.size();
  size_t p = n;
  for (size_t i = 0; i < n; ++i) {
    const Int& e = x.entries[i];
    if (e < 0) throw std::invalid_argument("cfe: entries must be nonnegative");
    if (e == 0) continue;
    if (p == n || e < x.entries[p]) p = i;
  }
  if (p == n) throw std::invalid_argument("cfe: all entries are zero");

  std::vector<Int> a(n);
  for (size_t i = 0; i < n; ++i) a[i] = x.entries[i] / x.entries[p];

  if (depth == 1) {
    return divide_by_gcd(RatioVec{a});
  }
  RatioVec r;
  r.entries.resize(n);
  for (size_t i = 0; i < n; ++i) {
    r.entries[i] = i == p ? x.entries[p] : x.entries[i] - a[i] * x.entries[p];
  }
  RatioVec rp = cfe(r, depth - 1);
  RatioVec y;
  y.entries.resize(n);
  for (size_t i = 0; i < n; ++i) {
    y.entries[i] = i == p ? rp.entries[p] : a[i] * rp.entries[p] + rp.entries[i];
  }
  return divide_by_gcd(y);
}

struct PreRounded {
  RatioVec magnitudes;     // round(|v_i| * 10^c), exact arithmetic throughout
  std::vector<int> signs;  // -1, 0, +1 of the original entries
  bool all_zero = false;   // degenerate: everything flushed to zero
};

inline PreRounded pre_round(const std::vector<double>& v, unsigned precision) {
  PreRounded out;
  Int scale = pow10(precision);
  out.all_zero = true;
  for (double x : v) {
    Rational exact = rational_from_double(x);  // throws on non-finite
    Rational mag = exact < 0 ? Rational(-exact) : exact;
    Int rounded = round_half_away_from_zero(mag * Rational(scale));
    if (rounded != 0) out.all_zero = false;
    out.magnitudes.entries.push_back(rounded);
    out.signs.push_back(rounded == 0 ? 0 : (x < 0 ? -1 : 1));
  }
  return out;
}

struct RoundedCandidate {
  std::vector<Int> values;  // signed, in the flat symbol-table layout
  unsigned depth = 0;
  bool stabilized = false;  // cfe output equals the pre-rounded ratio itself
};

inline RoundedCandidate round_candidate(const PreRounded& pre, unsigned depth) {
  RatioVec rounded = cfe(pre.magnitudes, depth);
  RoundedCandidate out;
  out.depth = depth;
  out.stabilized = rounded == divide_by_gcd(pre.magnitudes);
  out.values.reserve(rounded.entries.size());
  for (size_t i = 0; i < rounded.entries.size(); ++i) {
    Int v = rounded.entries[i];
    if (pre.signs[i] < 0) v = -v;
    out.values.push_back(v);
  }
  return out;
}

inline RoundedCandidate round_candidate(const std::vector<double>& v, unsigned precision,
                                        unsigned depth) {
  PreRounded pre = pre_round(v, precision);
  if (pre.all_zero) throw std::invalid_argument("round_candidate: zero candidate");
  return round_candidate(pre, depth);
}

}  // namespace polyitp
