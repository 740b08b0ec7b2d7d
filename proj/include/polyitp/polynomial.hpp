#pragma once

// Sparse multivariate polynomials over an abstract coefficient field.
// Exactly two instantiations are used: Polynomial<Rational> for everything
// symbolic and Polynomial<double> on the solver side.
//
// Monomials are globally ordered by graded lexicographic order (total degree
// first, then more of the lexicographically earlier variable comes first).
// All iteration, rendering and SDP variable indexing inherit this order, so
// runs are reproducible.

#include <algorithm>
#include <cstdint>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "polyitp/rational.hpp"

namespace polyitp {

struct VarId {
  std::string name;

  friend bool operator==(const VarId& a, const VarId& b) { return a.name == b.name; }
  friend bool operator!=(const VarId& a, const VarId& b) { return a.name != b.name; }
  friend bool operator<(const VarId& a, const VarId& b) { return a.name < b.name; }
};

class Monomial {
 public:
  Monomial() = default;
  explicit Monomial(std::map<VarId, unsigned> exps) : exps_(std::move(exps)) {
    for (auto it = exps_.begin(); it != exps_.end();) {
      it = it->second == 0 ? exps_.erase(it) : std::next(it);
    }
  }

  static Monomial one() { return Monomial(); }
  static Monomial var(const VarId& v, unsigned e = 1) {
    Monomial m;
    if (e > 0) m.exps_[v] = e;
    return m;
  }

  const std::map<VarId, unsigned>& exponents() const { return exps_; }
  bool is_one() const { return exps_.empty(); }

  unsigned degree_of(const VarId& v) const {
    auto it = exps_.find(v);
    return it == exps_.end() ? 0u : it->second;
  }

  unsigned total_degree() const {
    unsigned d = 0;
    for (const auto& [v, e] : exps_) d += e;
    return d;
  }

  Monomial operator*(const Monomial& o) const {
    Monomial r = *this;
    for (const auto& [v, e] : o.exps_) r.exps_[v] += e;
    return r;
  }

  std::set<VarId> vars() const {
    std::set<VarId> s;
    for (const auto& [v, e] : exps_) s.insert(v);
    return s;
  }

  friend bool operator==(const Monomial& a, const Monomial& b) { return a.exps_ == b.exps_; }
  friend bool operator!=(const Monomial& a, const Monomial& b) { return !(a == b); }

  // Ascending graded-lex: lower total degree first; on ties the monomial
  // with the higher exponent on the earliest differing variable is smaller,
  // which yields 1 < x < y < x^2 < x*y < y^2 < ...
  friend bool operator<(const Monomial& a, const Monomial& b) {
    unsigned da = a.total_degree(), db = b.total_degree();
    if (da != db) return da < db;
    auto ia = a.exps_.begin(), ib = b.exps_.begin();
    while (ia != a.exps_.end() && ib != b.exps_.end()) {
      if (ia->first != ib->first) return ia->first < ib->first;
      if (ia->second != ib->second) return ia->second > ib->second;
      ++ia, ++ib;
    }
    return false;  // identical (degrees equal, all shared prefixes equal)
  }

  std::string str() const {
    if (exps_.empty()) return "1";
    std::ostringstream os;
    bool first = true;
    for (const auto& [v, e] : exps_) {
      if (!first) os << "*";
      os << v.name;
      if (e > 1) os << "^" << e;
      first = false;
    }
    return os.str();
  }

 private:
  std::map<VarId, unsigned> exps_;  // no zero entries
};

constexpr int kDegreeOfZero = std::numeric_limits<int>::min();  // -infinity sentinel

template <typename F>
class Polynomial {
 public:
  using Terms = std::map<Monomial, F>;

  Polynomial() = default;

  static Polynomial zero() { return Polynomial(); }
  static Polynomial constant(const F& c) {
    Polynomial p;
    if (!(c == F(0))) p.terms_[Monomial::one()] = c;
    return p;
  }
  static Polynomial variable(const VarId& v) {
    Polynomial p;
    p.terms_[Monomial::var(v)] = F(1);
    return p;
  }
  static Polynomial term(const Monomial& m, const F& c) {
    Polynomial p;
    if (!(c == F(0))) p.terms_[m] = c;
    return p;
  }

  const Terms& terms() const { return terms_; }
  bool is_zero() const { return terms_.empty(); }

  F coefficient(const Monomial& m) const {
    auto it = terms_.find(m);
    return it == terms_.end() ? F(0) : it->second;
  }

  int degree() const {
    if (terms_.empty()) return kDegreeOfZero;
    unsigned d = 0;
    for (const auto& [m, c] : terms_) d = std::max(d, m.total_degree());
    return static_cast<int>(d);
  }

  std::set<VarId> vars() const {
    std::set<VarId> s;
    for (const auto& [m, c] : terms_) {
      auto mv = m.vars();
      s.insert(mv.begin(), mv.end());
    }
    return s;
  }

  Polynomial operator+(const Polynomial& o) const {
    Polynomial r = *this;
    for (const auto& [m, c] : o.terms_) r.add_term(m, c);
    return r;
  }

  Polynomial operator-() const {
    Polynomial r;
    for (const auto& [m, c] : terms_) r.terms_[m] = -c;
    return r;
  }

  Polynomial operator-(const Polynomial& o) const { return *this + (-o); }

  Polynomial operator*(const Polynomial& o) const {
    Polynomial r;
    for (const auto& [ma, ca] : terms_) {
      for (const auto& [mb, cb] : o.terms_) r.add_term(ma * mb, ca * cb);
    }
    return r;
  }

  Polynomial operator*(const F& c) const {
    Polynomial r;
    if (c == F(0)) return r;
    for (const auto& [m, k] : terms_) r.terms_[m] = k * c;
    return r;
  }

  Polynomial pow(unsigned e) const {
    Polynomial r = constant(F(1));
    for (unsigned i = 0; i < e; ++i) r = r * (*this);
    return r;
  }

  F eval(const std::map<VarId, F>& point) const {
    F total(0);
    for (const auto& [m, c] : terms_) {
      F v = c;
      for (const auto& [var, e] : m.exponents()) {
        auto it = point.find(var);
        if (it == point.end()) {
          throw std::invalid_argument("eval: point does not assign variable " + var.name);
        }
        for (unsigned k = 0; k < e; ++k) v = v * it->second;
      }
      total = total + v;
    }
    return total;
  }

  friend bool operator==(const Polynomial& a, const Polynomial& b) {
    return a.terms_ == b.terms_;
  }
  friend bool operator!=(const Polynomial& a, const Polynomial& b) { return !(a == b); }

  void add_term(const Monomial& m, const F& c) {
    auto it = terms_.find(m);
    if (it == terms_.end()) {
      if (!(c == F(0))) terms_[m] = c;
      return;
    }
    it->second = it->second + c;
    if (it->second == F(0)) terms_.erase(it);
  }

 private:
  Terms terms_;  // no zero coefficients
};

using PolyQ = Polynomial<Rational>;
using PolyD = Polynomial<double>;

inline PolyQ to_rational(const PolyD& p) {
  PolyQ q;
  for (const auto& [m, c] : p.terms()) q.add_term(m, rational_from_double(c));
  return q;
}

inline PolyD to_float(const PolyQ& p) {
  PolyD q;
  for (const auto& [m, c] : p.terms()) q.add_term(m, rational_to_double(c));
  return q;
}

// All monomials over `vars` with total degree <= d, ascending graded-lex.
inline std::vector<Monomial> monomials_up_to(const std::set<VarId>& vars, unsigned d) {
  std::vector<VarId> vs(vars.begin(), vars.end());
  std::vector<Monomial> out;
  std::map<VarId, unsigned> exps;
  // enumerate exponent vectors recursively, then sort into graded-lex order
  auto rec = [&](auto&& self, size_t idx, unsigned remaining) -> void {
    if (idx == vs.size()) {
      out.push_back(Monomial(exps));
      return;
    }
    for (unsigned e = 0; e <= remaining; ++e) {
      if (e > 0) exps[vs[idx]] = e;
      self(self, idx + 1, remaining - e);
      exps.erase(vs[idx]);
    }
  };
  rec(rec, 0, d);
  std::sort(out.begin(), out.end());
  return out;
}

namespace detail {

inline std::string coeff_str(const Rational& c) { return to_string(c); }
inline std::string coeff_str(double c) {
  std::ostringstream os;
  os.precision(17);
  os << c;
  return os.str();
}
inline bool coeff_is_one(const Rational& c) { return c == 1; }
inline bool coeff_is_one(double c) { return c == 1.0; }
inline bool coeff_negative(const Rational& c) { return c < 0; }
inline bool coeff_negative(double c) { return c < 0; }

}  // namespace detail

// Canonical rendering: terms ascending in graded-lex order, `^` powers,
// explicit `*` products, e.g. "-102 - 68*y + 34*y^2".
template <typename F>
std::string to_string(const Polynomial<F>& p) {
  if (p.is_zero()) return "0";
  std::ostringstream os;
  bool first = true;
  for (const auto& [m, c] : p.terms()) {
    F a = detail::coeff_negative(c) ? F(-c) : c;
    if (first) {
      if (detail::coeff_negative(c)) os << "-";
    } else {
      os << (detail::coeff_negative(c) ? " - " : " + ");
    }
    if (m.is_one()) {
      os << detail::coeff_str(a);
    } else if (detail::coeff_is_one(a)) {
      os << m.str();
    } else {
      os << detail::coeff_str(a) << "*" << m.str();
    }
    first = false;
  }
  return os.str();
}

}  // namespace polyitp
