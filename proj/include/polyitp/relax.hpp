#pragma once

// Reduction of certificate search to a semidefinite feasibility problem.
//
// Three builders share the machinery:
//  * build(..., Mode::StrictLeft)  -- strict-cone certificates whose cone of
//    positivity lives on the left system; interpolants come out strict.
//  * build(..., Mode::StrictRight) -- mirrored variant; the positive part
//    lives on the right system and interpolants come out non-strict.
//  * build_dai(...)                -- the older disequality-based scheme with
//    a fixed monoid element, kept as a comparison mode.
//
// Each sum-of-squares multiplier becomes one PSD Gram block over the
// monomial basis of its own system's variables up to degree floor(b/2); the
// cone scalars and free ideal-multiplier coefficients become scalar
// variables.  Matching monomial coefficients of the certificate identity
// gives the equality constraints; the scalar-sum >= 1 relaxation gives the
// single inequality; zeroing coefficients of monomials that mention
// non-common variables in the would-be interpolant enforces the common
// variable condition.  The objective minimizes the total trace, which keeps
// the solution set bounded and reproducible and biases toward small
// certificates.

#include <cstdint>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "polyitp/exact_linalg.hpp"
#include "polyitp/polynomial.hpp"
#include "polyitp/sas.hpp"

namespace polyitp {

enum class Mode { StrictLeft, StrictRight, Dai };

inline const char* mode_name(Mode m) {
  switch (m) {
    case Mode::StrictLeft: return "strict-left";
    case Mode::StrictRight: return "strict-right";
    case Mode::Dai: return "dai";
  }
  return "?";
}

inline Mode mode_from_name(const std::string& s) {
  if (s == "strict-left") return Mode::StrictLeft;
  if (s == "strict-right") return Mode::StrictRight;
  if (s == "dai") return Mode::Dai;
  throw std::invalid_argument("unknown mode: " + s);
}

// A polynomial predicate in disjunctive normal form.  Single-pair runs
// produce one atom; split runs produce a full DNF.
struct Interpolant {
  struct Atom {
    PolyQ poly;
    bool strict;  // poly > 0 versus poly >= 0
  };
  std::vector<std::vector<Atom>> dnf;

  static Interpolant single(Atom a) {
    Interpolant s;
    s.dnf.push_back({std::move(a)});
    return s;
  }
};

inline bool satisfies(const Interpolant::Atom& a, const std::map<VarId, Rational>& pt) {
  Rational v = a.poly.eval(pt);
  return a.strict ? v > 0 : v >= 0;
}

inline bool satisfies(const Interpolant& s, const std::map<VarId, Rational>& pt) {
  for (const auto& conj : s.dnf) {
    bool all = true;
    for (const auto& a : conj) {
      if (!satisfies(a, pt)) {
        all = false;
        break;
      }
    }
    if (all) return true;
  }
  return false;
}

inline std::string render(const Interpolant::Atom& a) {
  return to_string(a.poly) + (a.strict ? " > 0" : " >= 0");
}

inline std::string render(const Interpolant& s) {
  if (s.dnf.size() == 1 && s.dnf[0].size() == 1) return render(s.dnf[0][0]);
  std::ostringstream os;
  for (size_t i = 0; i < s.dnf.size(); ++i) {
    if (i) os << " \\/ ";
    os << "(";
    for (size_t j = 0; j < s.dnf[i].size(); ++j) {
      if (j) os << " /\\ ";
      os << render(s.dnf[i][j]);
    }
    os << ")";
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// Symbol table: the bijection between flat SDP variables and certificate roles

struct GramBlock {
  int side;                    // 0 = left system, 1 = right system
  std::vector<unsigned> fsel;  // 0/1 exponent per non-strict atom
  std::vector<unsigned> gsel;  // 0/1 exponent per strict atom (unused in Dai mode)
  PolyQ product;               // the cone generator product this SOS multiplies
  std::vector<Monomial> basis;
  std::string label;

  size_t dim() const { return basis.size(); }
  size_t num_entries() const { return dim() * (dim() + 1) / 2; }
};

struct GammaTerm {
  std::vector<unsigned> powers;  // one exponent per strict atom of the cone side
  PolyQ product;
  std::string label;
};

struct BetaVar {
  int side;
  size_t eq_index;  // which equality atom it multiplies
  Monomial mono;    // which monomial of the multiplier polynomial
};

struct SymbolTable {
  Mode mode = Mode::StrictLeft;
  Sas left, right;  // systems exactly as relaxed (after any translation)
  std::set<VarId> common_vars;
  unsigned degree_bound = 0;

  std::vector<GramBlock> blocks;
  std::vector<GammaTerm> gammas;  // empty in Dai mode
  std::vector<BetaVar> betas;
  PolyQ dai_g;  // fixed monoid element (Dai mode only)

  std::vector<size_t> block_offset;
  size_t gamma_offset = 0;
  size_t beta_offset = 0;
  size_t num_vars = 0;

  // upper-triangle, row-major within a block
  size_t entry_index(size_t blk, size_t p, size_t q) const {
    const size_t n = blocks[blk].dim();
    return block_offset[blk] + p * n - p * (p - 1) / 2 + (q - p);
  }
  size_t gamma_index(size_t k) const { return gamma_offset + k; }
  size_t beta_index(size_t k) const { return beta_offset + k; }

  void finalize_layout() {
    block_offset.clear();
    size_t at = 0;
    for (const auto& blk : blocks) {
      block_offset.push_back(at);
      at += blk.num_entries();
    }
    gamma_offset = at;
    at += gammas.size();
    beta_offset = at;
    at += betas.size();
    num_vars = at;
  }
};

// ---------------------------------------------------------------------------
// The SDP data handed to the numeric side

struct SdpProblem {
  struct Block {
    std::string label;
    size_t dim;
  };
  struct Scalar {
    std::string label;
    bool nonneg;  // gamma scalars are sign-constrained, beta coefficients are free
  };

  std::vector<Block> psd_blocks;
  std::vector<Scalar> scalar_vars;
  std::vector<SparseRow> eq_constraints;
  std::vector<std::string> eq_labels;
  std::vector<SparseRow> ineq_constraints;  // row >= rhs
  std::vector<std::string> ineq_labels;
  std::vector<std::pair<size_t, Rational>> objective;  // minimized
  size_t num_vars = 0;
};

namespace relax_detail {

inline std::string selector_label(const std::vector<unsigned>& f,
                                  const std::vector<unsigned>& g) {
  std::ostringstream os;
  os << "i=";
  for (unsigned b : f) os << b;
  os << ",j=";
  for (unsigned b : g) os << b;
  return os.str();
}

inline PolyQ selected_product(const std::vector<PolyQ>& fs, const std::vector<unsigned>& sel) {
  PolyQ p = PolyQ::constant(Rational(1));
  for (size_t i = 0; i < sel.size(); ++i) {
    if (sel[i]) p = p * fs[i];
  }
  return p;
}

inline std::vector<unsigned> bits(uint64_t mask, size_t n) {
  std::vector<unsigned> v(n);
  for (size_t i = 0; i < n; ++i) v[i] = (mask >> i) & 1u;
  return v;
}

inline void make_side_blocks(SymbolTable& table, const Sas& sys, int side, unsigned b) {
  const size_t s = sys.ge.size();
  const size_t t = table.mode == Mode::Dai ? 0 : sys.strict_or_diseq.size();
  const auto basis = monomials_up_to(sys.vars, b / 2);
  for (uint64_t fmask = 0; fmask < (uint64_t(1) << s); ++fmask) {
    for (uint64_t gmask = 0; gmask < (uint64_t(1) << t); ++gmask) {
      GramBlock blk;
      blk.side = side;
      blk.fsel = bits(fmask, s);
      blk.gsel = bits(gmask, t);
      blk.product = selected_product(sys.ge, blk.fsel) *
                    selected_product(sys.strict_or_diseq, blk.gsel);
      blk.basis = basis;
      blk.label = (side == 0 ? "alpha[" : "alpha'[") + selector_label(blk.fsel, blk.gsel) + "]";
      table.blocks.push_back(std::move(blk));
    }
  }
}

// k in N^t with k_1 + ... + k_t <= cap, lexicographic order
inline void enumerate_gammas(SymbolTable& table, const Sas& cone_side, unsigned cap) {
  const size_t t = cone_side.strict_or_diseq.size();
  std::vector<unsigned> k(t, 0);
  auto rec = [&](auto&& self, size_t idx, unsigned remaining) -> void {
    if (idx == t) {
      GammaTerm g;
      g.powers = k;
      g.product = PolyQ::constant(Rational(1));
      for (size_t i = 0; i < t; ++i) {
        for (unsigned e = 0; e < k[i]; ++e) g.product = g.product * cone_side.strict_or_diseq[i];
      }
      std::ostringstream os;
      os << "gamma[";
      for (size_t i = 0; i < t; ++i) os << (i ? "," : "") << k[i];
      os << "]";
      g.label = os.str();
      table.gammas.push_back(std::move(g));
      return;
    }
    for (unsigned e = 0; e <= remaining; ++e) {
      k[idx] = e;
      self(self, idx + 1, remaining - e);
    }
    k[idx] = 0;
  };
  rec(rec, 0, cap);
}

inline void make_betas(SymbolTable& table, unsigned b) {
  for (int side = 0; side <= 1; ++side) {
    const Sas& sys = side == 0 ? table.left : table.right;
    const auto basis = monomials_up_to(sys.vars, b);
    for (size_t j = 0; j < sys.eq.size(); ++j) {
      for (const auto& m : basis) table.betas.push_back(BetaVar{side, j, m});
    }
  }
}

// contribution of one flat variable to the certificate identity
inline PolyQ contribution(const SymbolTable& table, size_t var) {
  for (size_t bi = 0; bi < table.blocks.size(); ++bi) {
    const auto& blk = table.blocks[bi];
    if (var < table.block_offset[bi] + blk.num_entries()) {
      size_t rel = var - table.block_offset[bi];
      // invert the upper-triangle index
      size_t n = blk.dim();
      size_t p = 0, row_len = n;
      while (rel >= row_len) {
        rel -= row_len;
        ++p;
        --row_len;
      }
      size_t q = p + rel;
      PolyQ mm = PolyQ::term(blk.basis[p] * blk.basis[q], Rational(p == q ? 1 : 2));
      return mm * blk.product;
    }
  }
  if (var >= table.gamma_offset && var < table.gamma_offset + table.gammas.size()) {
    return table.gammas[var - table.gamma_offset].product;
  }
  const BetaVar& bv = table.betas[var - table.beta_offset];
  const Sas& sys = bv.side == 0 ? table.left : table.right;
  return PolyQ::term(bv.mono, Rational(1)) * sys.eq[bv.eq_index];
}

// true iff the flat variable takes part in the assembled interpolant
inline bool in_interpolant_assembly(const SymbolTable& table, size_t var) {
  for (size_t bi = 0; bi < table.blocks.size(); ++bi) {
    const auto& blk = table.blocks[bi];
    if (var < table.block_offset[bi] + blk.num_entries()) return blk.side == 0;
  }
  if (var >= table.gamma_offset && var < table.gamma_offset + table.gammas.size()) {
    return table.mode == Mode::StrictLeft;  // mirrored mode leaves g on the right
  }
  return table.betas[var - table.beta_offset].side == 0;
}

inline void emit_constraints(const SymbolTable& table, SdpProblem& prob,
                             const PolyQ& inhomogeneous) {
  // identity rows: one equality per monomial of the full expansion
  std::map<Monomial, SparseRow> rows;
  for (size_t v = 0; v < table.num_vars; ++v) {
    const PolyQ contrib = contribution(table, v);
    for (const auto& [m, c] : contrib.terms()) {
      rows[m].coeffs.push_back({v, c});
    }
  }
  for (const auto& [m, c] : inhomogeneous.terms()) rows[m];  // ensure row exists
  for (auto& [m, row] : rows) {
    row.rhs = -inhomogeneous.coefficient(m);
    prob.eq_constraints.push_back(row);
    prob.eq_labels.push_back("identity:" + m.str());
  }
  // common variable condition: the interpolant part may not mention
  // variables outside the shared set
  if (table.mode != Mode::Dai) {
    std::map<Monomial, SparseRow> cv_rows;
    for (size_t v = 0; v < table.num_vars; ++v) {
      if (!in_interpolant_assembly(table, v)) continue;
      const PolyQ contrib = contribution(table, v);
      for (const auto& [m, c] : contrib.terms()) {
        bool foreign = false;
        for (const auto& mv : m.vars()) {
          if (table.common_vars.find(mv) == table.common_vars.end()) {
            foreign = true;
            break;
          }
        }
        if (foreign) cv_rows[m].coeffs.push_back({v, c});
      }
    }
    for (auto& [m, row] : cv_rows) {
      row.rhs = 0;
      prob.eq_constraints.push_back(row);
      prob.eq_labels.push_back("common:" + m.str());
    }
  }
}

inline void emit_objective_and_vars(const SymbolTable& table, SdpProblem& prob) {
  for (size_t bi = 0; bi < table.blocks.size(); ++bi) {
    const auto& blk = table.blocks[bi];
    prob.psd_blocks.push_back({blk.label, blk.dim()});
    for (size_t p = 0; p < blk.dim(); ++p) {
      prob.objective.push_back({table.entry_index(bi, p, p), Rational(1)});
    }
  }
  for (size_t k = 0; k < table.gammas.size(); ++k) {
    prob.scalar_vars.push_back({table.gammas[k].label, true});
    prob.objective.push_back({table.gamma_index(k), Rational(1)});
  }
  for (size_t k = 0; k < table.betas.size(); ++k) {
    const auto& bv = table.betas[k];
    std::ostringstream os;
    os << (bv.side == 0 ? "beta[" : "beta'[") << bv.eq_index << "," << bv.mono.str() << "]";
    prob.scalar_vars.push_back({os.str(), false});
  }
  prob.num_vars = table.num_vars;
}

}  // namespace relax_detail

// Strict-cone relaxation (both orientations).  An empty strict list on the
// cone side is fine: sigma(b) then holds only the empty tuple, i.e. the
// positive-constant member of the strict cone.
inline std::pair<SdpProblem, SymbolTable> build(const Sas& T, const Sas& Tp, unsigned b,
                                                Mode mode) {
  if (mode == Mode::Dai) throw std::invalid_argument("build: use build_dai for Dai mode");
  for (const Sas* s : {&T, &Tp}) {
    if (s->kind == SasKind::WithDiseq && !s->strict_or_diseq.empty()) {
      throw std::invalid_argument("build: strict-cone modes need strict systems");
    }
  }
  SymbolTable table;
  table.mode = mode;
  table.left = T;
  table.right = Tp;
  table.degree_bound = b;
  for (const auto& v : T.vars) {
    if (Tp.vars.count(v)) table.common_vars.insert(v);
  }
  relax_detail::make_side_blocks(table, T, 0, b);
  relax_detail::make_side_blocks(table, Tp, 1, b);
  relax_detail::enumerate_gammas(table, mode == Mode::StrictLeft ? T : Tp, b + 1);
  relax_detail::make_betas(table, b);
  table.finalize_layout();

  SdpProblem prob;
  relax_detail::emit_objective_and_vars(table, prob);
  relax_detail::emit_constraints(table, prob, PolyQ::zero());
  SparseRow gamma_sum;
  for (size_t k = 0; k < table.gammas.size(); ++k) {
    gamma_sum.coeffs.push_back({table.gamma_index(k), Rational(1)});
  }
  gamma_sum.rhs = 1;
  prob.ineq_constraints.push_back(gamma_sum);
  prob.ineq_labels.push_back("gamma-sum");
  return {std::move(prob), std::move(table)};
}

// Comparison mode: fixed monoid element g, certificate identity
// 1 + f + f' + g^2 + h + h' = 0, interpolant 1/2 + f + g^2 + h > 0.
inline std::pair<SdpProblem, SymbolTable> build_dai(const Sas& T, const Sas& Tp, unsigned b) {
  for (const Sas* s : {&T, &Tp}) {
    if (s->kind == SasKind::WithStrict && !s->strict_or_diseq.empty()) {
      throw std::invalid_argument("build_dai: needs disequality systems");
    }
  }
  SymbolTable table;
  table.mode = Mode::Dai;
  table.left = T;
  table.right = Tp;
  table.degree_bound = b;
  for (const auto& v : T.vars) {
    if (Tp.vars.count(v)) table.common_vars.insert(v);
  }
  PolyQ g = PolyQ::constant(Rational(1));
  for (const auto& d : T.strict_or_diseq) g = g * d;
  for (const auto& d : Tp.strict_or_diseq) g = g * d;
  int deg = g.degree();
  if (deg <= 0) {
    g = PolyQ::constant(Rational(1));  // empty or constant product
  } else {
    unsigned e = b / (2 * static_cast<unsigned>(deg));
    g = g.pow(e);
  }
  table.dai_g = g;
  relax_detail::make_side_blocks(table, T, 0, b);
  relax_detail::make_side_blocks(table, Tp, 1, b);
  relax_detail::make_betas(table, b);
  table.finalize_layout();

  SdpProblem prob;
  relax_detail::emit_objective_and_vars(table, prob);
  PolyQ inhom = PolyQ::constant(Rational(1)) + g * g;
  relax_detail::emit_constraints(table, prob, inhom);
  return {std::move(prob), std::move(table)};
}

// ---------------------------------------------------------------------------
// Certificate assembly

struct Assembled {
  PolyQ f, g, h;    // left-side cone member, cone-of-positivity member, ideal member
  PolyQ fp, hp;     // right-side counterparts
  PolyQ identity_lhs;
  Interpolant::Atom interpolant;
};

// `values` is the flat exact variable vector in SymbolTable layout.
inline Assembled assemble(const std::vector<Rational>& values, const SymbolTable& table) {
  if (values.size() != table.num_vars) {
    throw std::invalid_argument("assemble: candidate length does not match symbol table");
  }
  Assembled out;
  for (size_t bi = 0; bi < table.blocks.size(); ++bi) {
    const auto& blk = table.blocks[bi];
    PolyQ sos;
    for (size_t p = 0; p < blk.dim(); ++p) {
      for (size_t q = p; q < blk.dim(); ++q) {
        const Rational& v = values[table.entry_index(bi, p, q)];
        if (v == 0) continue;
        sos.add_term(blk.basis[p] * blk.basis[q], p == q ? v : v * 2);
      }
    }
    PolyQ piece = sos * blk.product;
    (blk.side == 0 ? out.f : out.fp) = (blk.side == 0 ? out.f : out.fp) + piece;
  }
  for (size_t k = 0; k < table.gammas.size(); ++k) {
    out.g = out.g + table.gammas[k].product * values[table.gamma_index(k)];
  }
  for (size_t k = 0; k < table.betas.size(); ++k) {
    const auto& bv = table.betas[k];
    const Sas& sys = bv.side == 0 ? table.left : table.right;
    PolyQ piece = PolyQ::term(bv.mono, values[table.beta_index(k)]) * sys.eq[bv.eq_index];
    (bv.side == 0 ? out.h : out.hp) = (bv.side == 0 ? out.h : out.hp) + piece;
  }
  switch (table.mode) {
    case Mode::StrictLeft:
      out.identity_lhs = out.f + out.g + out.h + out.fp + out.hp;
      out.interpolant = {out.f + out.g + out.h, true};
      break;
    case Mode::StrictRight:
      out.identity_lhs = out.f + out.g + out.h + out.fp + out.hp;
      out.interpolant = {out.f + out.h, false};
      break;
    case Mode::Dai: {
      out.g = table.dai_g;
      PolyQ gsq = out.g * out.g;
      out.identity_lhs =
          PolyQ::constant(Rational(1)) + out.f + out.fp + gsq + out.h + out.hp;
      out.interpolant = {PolyQ::constant(make_rational(1, 2)) + out.f + gsq + out.h, true};
      break;
    }
  }
  return out;
}

}  // namespace polyitp
