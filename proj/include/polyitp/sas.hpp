#pragma once

// Semialgebraic systems: parsing, satisfaction, the strict/disequality
// translations and symbolic closure, plus a seeded rejection sampler used by
// the test suites.
//
// Input grammar (ASCII):
//   formula  := conj ( "\/" conj )*
//   conj     := atom ( "/\" atom )*        (parens allowed around a conj)
//   atom     := expr REL expr              REL in { >=, <=, >, <, =, != }
//   expr     := usual +, -, *, /, ^, parentheses; numbers may be integers,
//               decimals or fractions; division only by constants
// Atoms are normalized to p >= 0, p > 0, p != 0, p = 0.  A single system may
// not mix > and != atoms.

#include <cctype>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "polyitp/polynomial.hpp"

namespace polyitp {

enum class AtomKind { NonStrictGe, StrictGt, Diseq, Eq };
enum class SasKind { WithStrict, WithDiseq };

struct ParseError : std::runtime_error {
  int line, column;
  ParseError(const std::string& msg, int l, int c)
      : std::runtime_error(msg + " at line " + std::to_string(l) + ", column " +
                           std::to_string(c)),
        line(l),
        column(c) {}
};

struct Sas {
  SasKind kind = SasKind::WithStrict;
  std::vector<PolyQ> ge;               // f_i >= 0
  std::vector<PolyQ> strict_or_diseq;  // g_j > 0 (WithStrict) or g_j != 0 (WithDiseq)
  std::vector<PolyQ> eq;               // h_k = 0
  std::set<VarId> vars;

  void collect_vars() {
    vars.clear();
    for (const auto* list : {&ge, &strict_or_diseq, &eq}) {
      for (const auto& p : *list) {
        auto pv = p.vars();
        vars.insert(pv.begin(), pv.end());
      }
    }
  }

  friend bool operator==(const Sas& a, const Sas& b) {
    return a.kind == b.kind && a.ge == b.ge && a.strict_or_diseq == b.strict_or_diseq &&
           a.eq == b.eq && a.vars == b.vars;
  }
};

struct SasFormula {
  std::vector<Sas> disjuncts;  // nonempty; DNF over systems

  std::set<VarId> vars() const {
    std::set<VarId> s;
    for (const auto& d : disjuncts) s.insert(d.vars.begin(), d.vars.end());
    return s;
  }

  friend bool operator==(const SasFormula& a, const SasFormula& b) {
    return a.disjuncts == b.disjuncts;
  }
};

// ---------------------------------------------------------------------------
// Parser

namespace sas_detail {

enum class Tok { Num, Ident, Plus, Minus, Star, Slash, Caret, LParen, RParen,
                 Ge, Le, Gt, Lt, Eq, Neq, And, Or, End };

struct Token {
  Tok kind;
  std::string text;
  int line, col;
};

inline std::vector<Token> tokenize(const std::string& in) {
  std::vector<Token> out;
  int line = 1, col = 1;
  size_t i = 0;
  auto push = [&](Tok k, std::string t) { out.push_back({k, std::move(t), line, col}); };
  while (i < in.size()) {
    char c = in[i];
    if (c == '\n') {
      ++line;
      col = 1;
      ++i;
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i, ++col;
      continue;
    }
    if (c == '#') {  // comment to end of line
      while (i < in.size() && in[i] != '\n') ++i;
      continue;
    }
    auto two = in.substr(i, 2);
    if (two == "/\\") { push(Tok::And, two); i += 2; col += 2; continue; }
    if (two == "\\/") { push(Tok::Or, two); i += 2; col += 2; continue; }
    if (two == ">=") { push(Tok::Ge, two); i += 2; col += 2; continue; }
    if (two == "<=") { push(Tok::Le, two); i += 2; col += 2; continue; }
    if (two == "!=") { push(Tok::Neq, two); i += 2; col += 2; continue; }
    if (std::isdigit(static_cast<unsigned char>(c))) {
      size_t j = i;
      while (j < in.size() && (std::isdigit(static_cast<unsigned char>(in[j])) || in[j] == '.')) ++j;
      push(Tok::Num, in.substr(i, j - i));
      col += static_cast<int>(j - i);
      i = j;
      continue;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      size_t j = i;
      while (j < in.size() &&
             (std::isalnum(static_cast<unsigned char>(in[j])) || in[j] == '_')) ++j;
      push(Tok::Ident, in.substr(i, j - i));
      col += static_cast<int>(j - i);
      i = j;
      continue;
    }
    switch (c) {
      case '+': push(Tok::Plus, "+"); break;
      case '-': push(Tok::Minus, "-"); break;
      case '*': push(Tok::Star, "*"); break;
      case '/': push(Tok::Slash, "/"); break;
      case '^': push(Tok::Caret, "^"); break;
      case '(': push(Tok::LParen, "("); break;
      case ')': push(Tok::RParen, ")"); break;
      case '>': push(Tok::Gt, ">"); break;
      case '<': push(Tok::Lt, "<"); break;
      case '=': push(Tok::Eq, "="); break;
      default:
        throw ParseError(std::string("unexpected character '") + c + "'", line, col);
    }
    ++i, ++col;
  }
  out.push_back({Tok::End, "", line, col});
  return out;
}

class Parser {
 public:
  explicit Parser(const std::string& text) : toks_(tokenize(text)) {}

  SasFormula parse_formula() {
    SasFormula f;
    f.disjuncts.push_back(parse_disjunct());
    while (peek().kind == Tok::Or) {
      next();
      f.disjuncts.push_back(parse_disjunct());
    }
    expect(Tok::End, "end of input");
    return f;
  }

 private:
  const Token& peek() const { return toks_[pos_]; }
  const Token& next() { return toks_[pos_++]; }
  void expect(Tok k, const std::string& what) {
    if (peek().kind != k) {
      throw ParseError("expected " + what + ", found '" + peek().text + "'", peek().line,
                       peek().col);
    }
    next();
  }

  Sas parse_disjunct() {
    Sas s;
    strict_seen_in_current_ = false;
    diseq_seen_in_current_ = false;
    parse_conj_into(s);
    s.kind = diseq_seen_in_current_ ? SasKind::WithDiseq : SasKind::WithStrict;
    s.collect_vars();
    return s;
  }

  void parse_conj_into(Sas& s) {
    parse_item_into(s);
    while (peek().kind == Tok::And) {
      next();
      parse_item_into(s);
    }
  }

  // item := "(" conj ")" | atom.  A leading '(' is ambiguous (it may open a
  // parenthesized expression instead), so the conjunction reading is tried
  // first and rolled back on failure.
  void parse_item_into(Sas& s) {
    if (peek().kind == Tok::LParen) {
      size_t save = pos_;
      bool ss = strict_seen_in_current_, ds = diseq_seen_in_current_;
      next();
      try {
        Sas tmp;
        parse_conj_into(tmp);
        if (peek().kind == Tok::RParen) {
          next();
          for (auto& p : tmp.ge) s.ge.push_back(std::move(p));
          for (auto& p : tmp.strict_or_diseq) s.strict_or_diseq.push_back(std::move(p));
          for (auto& p : tmp.eq) s.eq.push_back(std::move(p));
          return;
        }
      } catch (const ParseError&) {
      }
      pos_ = save;
      strict_seen_in_current_ = ss;
      diseq_seen_in_current_ = ds;
    }
    parse_atom(s);
  }

  void parse_atom(Sas& s) {
    PolyQ lhs = parse_expr();
    Tok rel = peek().kind;
    if (rel != Tok::Ge && rel != Tok::Le && rel != Tok::Gt && rel != Tok::Lt &&
        rel != Tok::Eq && rel != Tok::Neq) {
      throw ParseError("expected relation operator, found '" + peek().text + "'",
                       peek().line, peek().col);
    }
    const Token& rtok = next();
    PolyQ rhs = parse_expr();
    PolyQ p = lhs - rhs;
    switch (rel) {
      case Tok::Ge: s.ge.push_back(p); break;
      case Tok::Le: s.ge.push_back(-p); break;
      case Tok::Gt: add_strict(s, p, rtok); break;
      case Tok::Lt: add_strict(s, -p, rtok); break;
      case Tok::Eq: s.eq.push_back(p); break;
      case Tok::Neq: add_diseq(s, p, rtok); break;
      default: break;
    }
  }

  void add_strict(Sas& s, PolyQ p, const Token& at) {
    if (diseq_seen_in_current_) {
      throw ParseError("a system may not mix strict inequalities and disequalities",
                       at.line, at.col);
    }
    strict_seen_in_current_ = true;
    s.kind = SasKind::WithStrict;
    s.strict_or_diseq.push_back(std::move(p));
  }

  void add_diseq(Sas& s, PolyQ p, const Token& at) {
    if (strict_seen_in_current_) {
      throw ParseError("a system may not mix strict inequalities and disequalities",
                       at.line, at.col);
    }
    diseq_seen_in_current_ = true;
    s.kind = SasKind::WithDiseq;
    s.strict_or_diseq.push_back(std::move(p));
  }

  PolyQ parse_expr() {
    PolyQ p = peek().kind == Tok::Minus ? (next(), -parse_term()) : parse_term();
    while (peek().kind == Tok::Plus || peek().kind == Tok::Minus) {
      bool plus = next().kind == Tok::Plus;
      PolyQ t = parse_term();
      p = plus ? p + t : p - t;
    }
    return p;
  }

  PolyQ parse_term() {
    PolyQ p = parse_factor();
    while (peek().kind == Tok::Star || peek().kind == Tok::Slash) {
      const Token& op = next();
      PolyQ f = parse_factor();
      if (op.kind == Tok::Star) {
        p = p * f;
      } else {
        if (f.degree() > 0 || f.is_zero()) {
          throw ParseError("division is only defined by nonzero constants", op.line, op.col);
        }
        Rational c = f.coefficient(Monomial::one());
        p = p * (Rational(1) / c);
      }
    }
    return p;
  }

  PolyQ parse_factor() {
    PolyQ base = parse_base();
    if (peek().kind == Tok::Caret) {
      const Token& op = next();
      if (peek().kind != Tok::Num || peek().text.find('.') != std::string::npos) {
        throw ParseError("exponent must be a nonnegative integer", op.line, op.col);
      }
      unsigned e = static_cast<unsigned>(std::stoul(next().text));
      return base.pow(e);
    }
    return base;
  }

  PolyQ parse_base() {
    const Token& t = peek();
    switch (t.kind) {
      case Tok::Num:
        next();
        return PolyQ::constant(parse_rational(t.text));
      case Tok::Ident:
        next();
        return PolyQ::variable(VarId{t.text});
      case Tok::LParen: {
        next();
        PolyQ p = parse_expr();
        expect(Tok::RParen, "')'");
        return p;
      }
      case Tok::Minus:
        next();
        return -parse_factor();
      default:
        throw ParseError("expected a number, variable or '('", t.line, t.col);
    }
  }

  std::vector<Token> toks_;
  size_t pos_ = 0;
  bool strict_seen_in_current_ = false;
  bool diseq_seen_in_current_ = false;
};

}  // namespace sas_detail

inline SasFormula parse(const std::string& text) {
  return sas_detail::Parser(text).parse_formula();
}

// Problem file: a "T:" section and a "T':" section, '#' comments, blank
// lines ignored.  Each section body is a formula in the grammar above.
inline std::pair<SasFormula, SasFormula> parse_problem(const std::string& text) {
  std::string t_body, tp_body;
  std::string* current = nullptr;
  std::istringstream is(text);
  std::string raw;
  int lineno = 0;
  while (std::getline(is, raw)) {
    ++lineno;
    std::string line = raw.substr(0, raw.find('#'));
    auto strip = [](std::string s) {
      size_t a = s.find_first_not_of(" \t\r");
      if (a == std::string::npos) return std::string();
      size_t b = s.find_last_not_of(" \t\r");
      return s.substr(a, b - a + 1);
    };
    std::string stripped = strip(line);
    if (stripped == "T:") {
      current = &t_body;
    } else if (stripped == "T':") {
      current = &tp_body;
    } else if (!stripped.empty()) {
      if (current == nullptr) {
        throw ParseError("problem text before any 'T:' or 'T'':' section", lineno, 1);
      }
      *current += line + "\n";
    }
  }
  if (t_body.empty() || tp_body.empty()) {
    throw ParseError("problem file needs nonempty 'T:' and 'T'':' sections", lineno, 1);
  }
  return {parse(t_body), parse(tp_body)};
}

// ---------------------------------------------------------------------------
// Rendering (inverse of parse up to normalization)

inline std::string render(const Sas& s) {
  std::ostringstream os;
  bool first = true;
  auto emit = [&](const PolyQ& p, const char* rel) {
    if (!first) os << " /\\ ";
    os << to_string(p) << " " << rel << " 0";
    first = false;
  };
  for (const auto& p : s.ge) emit(p, ">=");
  for (const auto& p : s.strict_or_diseq) emit(p, s.kind == SasKind::WithStrict ? ">" : "!=");
  for (const auto& p : s.eq) emit(p, "=");
  if (first) os << "0 = 0";  // empty system is the trivially true one
  return os.str();
}

inline std::string render(const SasFormula& f) {
  if (f.disjuncts.size() == 1) return render(f.disjuncts[0]);
  std::ostringstream os;
  for (size_t i = 0; i < f.disjuncts.size(); ++i) {
    if (i) os << " \\/ ";
    os << "(" << render(f.disjuncts[i]) << ")";
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// Semantics

inline bool satisfies(const Sas& s, const std::map<VarId, Rational>& point) {
  for (const auto& v : s.vars) {
    if (point.find(v) == point.end()) {
      throw std::invalid_argument("satisfies: point does not assign variable " + v.name);
    }
  }
  for (const auto& p : s.ge) {
    if (p.eval(point) < 0) return false;
  }
  for (const auto& p : s.strict_or_diseq) {
    Rational v = p.eval(point);
    if (s.kind == SasKind::WithStrict ? !(v > 0) : v == 0) return false;
  }
  for (const auto& p : s.eq) {
    if (!(p.eval(point) == 0)) return false;
  }
  return true;
}

inline bool satisfies(const SasFormula& f, const std::map<VarId, Rational>& point) {
  for (const auto& d : f.disjuncts) {
    if (satisfies(d, point)) return true;
  }
  return false;
}

// g != 0 becomes g^2 > 0; solution sets agree pointwise.
inline Sas diseq_to_strict(const Sas& s) {
  if (s.kind != SasKind::WithDiseq && !s.strict_or_diseq.empty()) {
    throw std::invalid_argument("diseq_to_strict expects a disequality system");
  }
  Sas r = s;
  r.kind = SasKind::WithStrict;
  r.strict_or_diseq.clear();
  for (const auto& g : s.strict_or_diseq) r.strict_or_diseq.push_back(g * g);
  r.collect_vars();
  return r;
}

// g > 0 becomes the pair (g >= 0, g != 0), keeping the sign so that solution
// sets agree pointwise.
inline Sas strict_to_diseq(const Sas& s) {
  if (s.kind != SasKind::WithStrict && !s.strict_or_diseq.empty()) {
    throw std::invalid_argument("strict_to_diseq expects a strict system");
  }
  Sas r;
  r.kind = SasKind::WithDiseq;
  r.ge = s.ge;
  r.eq = s.eq;
  for (const auto& g : s.strict_or_diseq) {
    r.ge.push_back(g);
    r.strict_or_diseq.push_back(g);
  }
  r.collect_vars();
  return r;
}

// Drops disequalities (resp. weakens strict inequalities to non-strict).
inline Sas symbolic_closure(const Sas& s) {
  Sas r;
  r.kind = s.kind;
  r.ge = s.ge;
  r.eq = s.eq;
  if (s.kind == SasKind::WithStrict) {
    for (const auto& g : s.strict_or_diseq) r.ge.push_back(g);
  }
  // WithDiseq: the disequalities are simply dropped
  r.collect_vars();
  return r;
}

// ---------------------------------------------------------------------------
// Seeded rejection sampling (test-suite sanity only; the tool itself never
// decides disjointness by sampling)

struct Box {
  std::map<VarId, std::pair<Rational, Rational>> ranges;
};

inline std::vector<std::map<VarId, Rational>> sample_region(const Sas& s, const Box& box,
                                                            size_t n, uint64_t seed,
                                                            size_t max_attempts = 0) {
  std::vector<std::map<VarId, Rational>> out;
  if (n == 0) return out;
  for (const auto& v : s.vars) {
    if (box.ranges.find(v) == box.ranges.end()) {
      throw std::invalid_argument("sample_region: box does not cover variable " + v.name);
    }
  }
  if (max_attempts == 0) max_attempts = 200 * n;
  std::mt19937_64 rng(seed);
  const Rational scale = make_rational(1, Int(1) << 32);
  for (size_t attempt = 0; attempt < max_attempts && out.size() < n; ++attempt) {
    std::map<VarId, Rational> pt;
    for (const auto& [v, range] : box.ranges) {
      // dyadic uniform draw: lo + (hi-lo) * u/2^32, exact in rationals
      uint64_t u = rng() >> 32;
      pt[v] = range.first + (range.second - range.first) * Rational(u) * scale;
    }
    if (satisfies(s, pt)) out.push_back(std::move(pt));
  }
  return out;
}

}  // namespace polyitp
