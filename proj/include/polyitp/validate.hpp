#pragma once

// Exact symbolic validation of rounded candidates.  A candidate passes when
//   * the certificate identity holds exactly over the rationals,
//   * every Gram block is positive semidefinite (all principal minors >= 0),
//   * the cone-of-positivity scalars are nonnegative with positive sum
//     (the >= 1 relaxation wound back to its scale-invariant form), and
//   * the assembled predicate mentions only shared variables.
// A pass is a machine-checked proof that the assembled predicate is an
// interpolant; nothing numeric is trusted.
//
// The identity is checked on the assembled polynomial, not on the solver's
// linearized rows, so a builder bug cannot silently validate itself.
//
// In comparison (Dai) mode the identity is inhomogeneous, so the rounded
// ratio is first rescaled by the unique positive factor that can close the
// identity, if one exists.

#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "polyitp/exact_linalg.hpp"
#include "polyitp/relax.hpp"
#include "polyitp/round.hpp"

namespace polyitp {

// Flat exact candidate in SymbolTable layout.
struct ExactCandidate {
  std::vector<Rational> values;

  static ExactCandidate from_rounded(const RoundedCandidate& rc) {
    ExactCandidate c;
    c.values.reserve(rc.values.size());
    for (const Int& v : rc.values) c.values.push_back(Rational(v));
    return c;
  }

  ExactCandidate scaled(const Rational& s) const {
    ExactCandidate c;
    c.values.reserve(values.size());
    for (const Rational& v : values) c.values.push_back(v * s);
    return c;
  }
};

inline RationalMatrix block_matrix(const ExactCandidate& c, const SymbolTable& table,
                                   size_t bi) {
  const size_t n = table.blocks[bi].dim();
  RationalMatrix m(n, std::vector<Rational>(n));
  for (size_t p = 0; p < n; ++p) {
    for (size_t q = p; q < n; ++q) {
      const Rational& v = c.values[table.entry_index(bi, p, q)];
      m[p][q] = v;
      m[q][p] = v;
    }
  }
  return m;
}

struct PsdCheckStats {
  size_t minors_checked = 0;
};

// PSD test by exhaustive principal minors: M is PSD iff the determinant of
// every nonempty principal submatrix is nonnegative.  (Leading minors alone
// are not enough: diag(0,-1) has leading minors 0, 0.)  Exponential in the
// dimension, hence the hard guard.
inline bool is_psd_exact(const RationalMatrix& m, std::string* witness = nullptr,
                         PsdCheckStats* stats = nullptr) {
  const size_t n = m.size();
  for (size_t i = 0; i < n; ++i) {
    if (m[i].size() != n) throw std::invalid_argument("is_psd_exact: matrix not square");
    for (size_t j = i + 1; j < n; ++j) {
      if (!(m[i][j] == m[j][i])) {
        throw std::invalid_argument("is_psd_exact: matrix not symmetric");
      }
    }
  }
  if (n > 16) {
    throw std::invalid_argument("is_psd_exact: dimension above the principal-minor guard");
  }
  for (uint32_t mask = 1; mask < (1u << n); ++mask) {
    std::vector<size_t> idx;
    for (size_t i = 0; i < n; ++i) {
      if (mask & (1u << i)) idx.push_back(i);
    }
    RationalMatrix sub(idx.size(), std::vector<Rational>(idx.size()));
    for (size_t a = 0; a < idx.size(); ++a) {
      for (size_t b = 0; b < idx.size(); ++b) sub[a][b] = m[idx[a]][idx[b]];
    }
    if (stats) ++stats->minors_checked;
    if (determinant(sub) < 0) {
      if (witness) {
        std::ostringstream os;
        os << "{";
        for (size_t a = 0; a < idx.size(); ++a) os << (a ? "," : "") << idx[a];
        os << "}";
        *witness = os.str();
      }
      return false;
    }
  }
  return true;
}

inline bool check_strict_cone(const ExactCandidate& c, const SymbolTable& table) {
  Rational sum(0);
  for (size_t k = 0; k < table.gammas.size(); ++k) {
    const Rational& g = c.values[table.gamma_index(k)];
    if (g < 0) return false;
    sum += g;
  }
  return sum > 0;
}

struct ValidationReport {
  bool eq_ok = false;
  std::string eq_witness;  // first failing monomial
  bool psd_ok = false;
  std::string psd_witness;  // block label and minor subset
  bool strict_ok = false;
  bool common_ok = false;
  std::string common_witness;
  bool pass = false;
  Rational dai_scale = 1;  // positive factor applied in comparison mode
};

// Positive scale closing the inhomogeneous comparison-mode identity, if any.
inline std::optional<Rational> dai_closing_scale(const Assembled& parts) {
  PolyQ linear = parts.f + parts.fp + parts.h + parts.hp;
  PolyQ inhom = PolyQ::constant(Rational(1)) + parts.g * parts.g;
  if (linear.is_zero()) return std::nullopt;
  const auto& [m0, c0] = *linear.terms().begin();
  Rational lambda = -inhom.coefficient(m0) / c0;
  if (!(lambda > 0)) return std::nullopt;
  if (!(linear * lambda + inhom).is_zero()) return std::nullopt;
  return lambda;
}

inline bool check_equalities(const ExactCandidate& c, const SymbolTable& table,
                             std::string* witness = nullptr) {
  Assembled parts = assemble(c.values, table);
  if (table.mode == Mode::Dai) {
    PolyQ linear = parts.f + parts.fp + parts.h + parts.hp;
    std::optional<Rational> lambda = dai_closing_scale(parts);
    if (!lambda) {
      if (witness) {
        PolyQ residual = linear + PolyQ::constant(Rational(1)) + parts.g * parts.g;
        *witness =
            residual.is_zero() ? "1" : residual.terms().begin()->first.str();
      }
      return false;
    }
    return true;
  }
  if (!parts.identity_lhs.is_zero()) {
    if (witness) *witness = parts.identity_lhs.terms().begin()->first.str();
    return false;
  }
  return true;
}

inline ValidationReport validate(const ExactCandidate& c, const SymbolTable& table) {
  ValidationReport rep;
  rep.eq_ok = check_equalities(c, table, &rep.eq_witness);
  if (table.mode == Mode::Dai) {
    Assembled parts = assemble(c.values, table);
    if (auto lambda = dai_closing_scale(parts)) rep.dai_scale = *lambda;
  }

  rep.psd_ok = true;
  for (size_t bi = 0; bi < table.blocks.size() && rep.psd_ok; ++bi) {
    std::string minor;
    if (!is_psd_exact(block_matrix(c, table, bi), &minor)) {
      rep.psd_ok = false;
      rep.psd_witness = table.blocks[bi].label + " minor " + minor;
    }
  }

  rep.strict_ok = table.mode == Mode::Dai ? true : check_strict_cone(c, table);

  if (table.mode == Mode::Dai) {
    rep.common_ok = true;  // the comparison scheme does not enforce the condition
  } else {
    Assembled parts = assemble(c.values, table);
    rep.common_ok = true;
    for (const auto& v : parts.interpolant.poly.vars()) {
      if (table.common_vars.find(v) == table.common_vars.end()) {
        rep.common_ok = false;
        rep.common_witness = v.name;
        break;
      }
    }
  }

  rep.pass = rep.eq_ok && rep.psd_ok && rep.strict_ok && rep.common_ok;
  return rep;
}

// System translation applied before relaxation: the strict-cone modes want
// strict systems, the comparison mode wants disequality systems.
inline std::pair<Sas, Sas> systems_for_mode(const Sas& T, const Sas& Tp, Mode mode) {
  auto adapt = [&](const Sas& s) {
    if (mode == Mode::Dai) {
      return s.kind == SasKind::WithStrict && !s.strict_or_diseq.empty() ? strict_to_diseq(s)
                                                                         : s;
    }
    return s.kind == SasKind::WithDiseq && !s.strict_or_diseq.empty() ? diseq_to_strict(s)
                                                                      : s;
  };
  Sas left = adapt(T), right = adapt(Tp);
  if (mode == Mode::Dai) {
    left.kind = SasKind::WithDiseq;
    right.kind = SasKind::WithDiseq;
  } else {
    left.kind = SasKind::WithStrict;
    right.kind = SasKind::WithStrict;
  }
  return {left, right};
}

// ---------------------------------------------------------------------------
// Certificate files: exact data only, auditable with any rational toolkit.

struct PairCertificate {
  size_t i = 0, j = 0;  // disjunct indices of the split run
  Mode mode = Mode::StrictLeft;
  unsigned degree_bound = 0;
  unsigned depth = 0;
  ExactCandidate candidate;
};

inline std::string write_certificate(const std::vector<PairCertificate>& pairs,
                                     const std::vector<SymbolTable>& tables) {
  std::ostringstream os;
  os << "polyitp-certificate v1\n";
  os << "pairs " << pairs.size() << "\n";
  for (size_t pc = 0; pc < pairs.size(); ++pc) {
    const PairCertificate& cert = pairs[pc];
    const SymbolTable& table = tables[pc];
    os << "begin-pair " << cert.i << " " << cert.j << " " << mode_name(cert.mode) << " "
       << cert.degree_bound << " " << cert.depth << "\n";
    for (size_t bi = 0; bi < table.blocks.size(); ++bi) {
      os << "block " << table.blocks[bi].dim() << "  # " << table.blocks[bi].label << "\n";
      for (size_t p = 0; p < table.blocks[bi].dim(); ++p) {
        for (size_t q = 0; q < table.blocks[bi].dim(); ++q) {
          size_t a = std::min(p, q), b = std::max(p, q);
          os << (q ? " " : "") << to_string(cert.candidate.values[table.entry_index(bi, a, b)]);
        }
        os << "\n";
      }
    }
    os << "gammas " << table.gammas.size() << "\n";
    for (size_t k = 0; k < table.gammas.size(); ++k) {
      os << (k ? " " : "") << to_string(cert.candidate.values[table.gamma_index(k)]);
    }
    os << "\n";
    os << "betas " << table.betas.size() << "\n";
    for (size_t k = 0; k < table.betas.size(); ++k) {
      os << (k ? " " : "") << to_string(cert.candidate.values[table.beta_index(k)]);
    }
    os << "\n";
    Assembled parts = assemble(cert.candidate.values, table);
    os << "# interpolant: " << render(parts.interpolant) << "\n";
    os << "end-pair\n";
  }
  return os.str();
}

inline std::vector<PairCertificate> read_certificate(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  auto next_line = [&]() {
    while (std::getline(is, line)) {
      auto hash = line.find('#');
      if (hash != std::string::npos) line = line.substr(0, hash);
      auto end = line.find_last_not_of(" \t\r");
      if (end == std::string::npos) continue;
      line = line.substr(0, end + 1);
      return true;
    }
    return false;
  };
  if (!next_line() || line != "polyitp-certificate v1") {
    throw std::runtime_error("certificate: bad header");
  }
  if (!next_line() || line.rfind("pairs ", 0) != 0) {
    throw std::runtime_error("certificate: missing pair count");
  }
  size_t npairs = std::stoul(line.substr(6));
  std::vector<PairCertificate> out;
  for (size_t pc = 0; pc < npairs; ++pc) {
    if (!next_line() || line.rfind("begin-pair ", 0) != 0) {
      throw std::runtime_error("certificate: missing begin-pair");
    }
    PairCertificate cert;
    {
      std::istringstream ls(line.substr(11));
      std::string mode;
      if (!(ls >> cert.i >> cert.j >> mode >> cert.degree_bound >> cert.depth)) {
        throw std::runtime_error("certificate: malformed begin-pair line");
      }
      cert.mode = mode_from_name(mode);
    }
    std::vector<Rational> gram_values, gammas, betas;
    while (true) {
      if (!next_line()) throw std::runtime_error("certificate: truncated pair");
      if (line.rfind("block ", 0) == 0) {
        size_t dim = std::stoul(line.substr(6));
        RationalMatrix m(dim, std::vector<Rational>(dim));
        for (size_t p = 0; p < dim; ++p) {
          if (!next_line()) throw std::runtime_error("certificate: truncated block");
          std::istringstream ls(line);
          std::string tok;
          for (size_t q = 0; q < dim; ++q) {
            if (!(ls >> tok)) throw std::runtime_error("certificate: short block row");
            m[p][q] = parse_rational(tok);
          }
        }
        for (size_t p = 0; p < dim; ++p) {
          for (size_t q = p; q < dim; ++q) {
            if (!(m[p][q] == m[q][p])) {
              throw std::runtime_error("certificate: block not symmetric");
            }
            gram_values.push_back(m[p][q]);
          }
        }
      } else if (line.rfind("gammas ", 0) == 0) {
        size_t k = std::stoul(line.substr(7));
        if (k > 0) {
          if (!next_line()) throw std::runtime_error("certificate: truncated gammas");
          std::istringstream ls(line);
          std::string tok;
          for (size_t a = 0; a < k; ++a) {
            if (!(ls >> tok)) throw std::runtime_error("certificate: short gamma line");
            gammas.push_back(parse_rational(tok));
          }
        }
      } else if (line.rfind("betas ", 0) == 0) {
        size_t k = std::stoul(line.substr(6));
        if (k > 0) {
          if (!next_line()) throw std::runtime_error("certificate: truncated betas");
          std::istringstream ls(line);
          std::string tok;
          for (size_t a = 0; a < k; ++a) {
            if (!(ls >> tok)) throw std::runtime_error("certificate: short beta line");
            betas.push_back(parse_rational(tok));
          }
        }
      } else if (line == "end-pair") {
        break;
      } else {
        throw std::runtime_error("certificate: unexpected line: " + line);
      }
    }
    cert.candidate.values = std::move(gram_values);
    for (auto& g : gammas) cert.candidate.values.push_back(std::move(g));
    for (auto& b : betas) cert.candidate.values.push_back(std::move(b));
    out.push_back(std::move(cert));
  }
  return out;
}

}  // namespace polyitp
