#pragma once

// Embedded semidefinite solver and file interchange.
//
// The solver is a dense primal-dual path-following method (HKM scaling,
// Mehrotra predictor-corrector) for
//     minimize <C,X>  subject to  <A_i,X> = b_i,  X in a product of PSD cones.
// Problems arriving here are small: blocks of dimension up to a few tens and
// at most a few hundred constraints, so everything is dense Eigen and the
// Schur complement is formed explicitly.
//
// Before solving, the rational constraint rows are reduced exactly over Q and
// only a linearly independent subset is handed to the float solver; the
// common-variable rows emitted by the relaxation are implied by the identity
// rows and would otherwise make the Schur complement singular.
//
// Nonnegative scalars ride along as 1x1 blocks.  Free scalars are split into
// differences of two nonnegative halves; the halves carry unit objective
// weight, so free coefficients are L1-regularized, which keeps the optimal
// face bounded and biases toward sparse ideal multipliers.
//
// Determinism: fixed iteration order, no randomness, no threading.  Two runs
// on the same input produce bitwise-identical output.

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "polyitp/exact_linalg.hpp"
#include "polyitp/relax.hpp"

namespace polyitp {

enum class SolveStatus { Optimal, NearFeasible, Infeasible, Stalled };

inline const char* status_name(SolveStatus s) {
  switch (s) {
    case SolveStatus::Optimal: return "optimal";
    case SolveStatus::NearFeasible: return "near-feasible";
    case SolveStatus::Infeasible: return "infeasible";
    case SolveStatus::Stalled: return "stalled";
  }
  return "?";
}

struct SdpOptions {
  double feas_tol = 1e-8;
  double gap_tol = 1e-8;
  int max_iters = 200;
  bool l1_on_free = true;  // objective weight 1 on both halves of split free vars
};

struct SdpSolution {
  std::vector<Eigen::MatrixXd> block_values;  // one per SdpProblem::psd_blocks
  std::vector<double> scalar_values;          // one per SdpProblem::scalar_vars
  SolveStatus status = SolveStatus::Stalled;
  double primal_residual = std::numeric_limits<double>::infinity();
  double dual_residual = std::numeric_limits<double>::infinity();
  double duality_gap = std::numeric_limits<double>::infinity();
  std::vector<double> gap_trace;  // complementarity gap per accepted iteration
  int iterations = 0;
};

namespace sdp_detail {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Canonical cone form of an SdpProblem: every variable lives in some block.
struct Canonical {
  std::vector<int> dims;  // cone block dimensions (1 for scalars)
  // entry lists per constraint: (block, row, col, value), row <= col
  struct Entry {
    int blk, p, q;
    double v;
  };
  std::vector<std::vector<Entry>> rows;
  std::vector<double> b;
  std::vector<Entry> cost;

  // provenance of cone blocks
  size_t num_gram_blocks = 0;
  std::vector<int> scalar_plus_block;   // per SdpProblem scalar: its (+) block
  std::vector<int> scalar_minus_block;  // -1 unless the scalar is free
};

// Exact independent-row selection happens here, before any floats appear.
inline Canonical canonicalize(const SdpProblem& p, const SdpOptions& opts) {
  Canonical c;
  c.num_gram_blocks = p.psd_blocks.size();
  for (const auto& blk : p.psd_blocks) c.dims.push_back(static_cast<int>(blk.dim));
  for (const auto& sc : p.scalar_vars) {
    c.scalar_plus_block.push_back(static_cast<int>(c.dims.size()));
    c.dims.push_back(1);
    if (sc.nonneg) {
      c.scalar_minus_block.push_back(-1);
    } else {
      c.scalar_minus_block.push_back(static_cast<int>(c.dims.size()));
      c.dims.push_back(1);
    }
  }
  std::vector<int> slack_block(p.ineq_constraints.size());
  for (size_t r = 0; r < p.ineq_constraints.size(); ++r) {
    slack_block[r] = static_cast<int>(c.dims.size());
    c.dims.push_back(1);
  }

  // canonical variable space for the exact reduction: one coordinate per
  // upper-triangle entry of every cone block
  std::vector<size_t> blk_off;
  size_t at = 0;
  for (int d : c.dims) {
    blk_off.push_back(at);
    at += static_cast<size_t>(d) * (d + 1) / 2;
  }
  const size_t canon_vars = at;
  auto tri_index = [&](int blk, int pp, int qq) {
    int n = c.dims[blk];
    return blk_off[blk] + static_cast<size_t>(pp) * n - pp * (pp - 1) / 2 + (qq - pp);
  };

  // translate one original row into canonical coordinates
  size_t gram_entry_count = 0;
  std::vector<size_t> gram_off(p.psd_blocks.size());
  for (size_t bi = 0; bi < p.psd_blocks.size(); ++bi) {
    gram_off[bi] = gram_entry_count;
    gram_entry_count += p.psd_blocks[bi].dim * (p.psd_blocks[bi].dim + 1) / 2;
  }
  auto locate = [&](size_t var) -> std::tuple<int, int, int, bool> {
    // returns (blk, p, q, negated_half_exists->use second return via scalar map)
    if (var < gram_entry_count) {
      size_t bi = 0;
      while (bi + 1 < gram_off.size() && gram_off[bi + 1] <= var) ++bi;
      size_t rel = var - gram_off[bi];
      int n = static_cast<int>(p.psd_blocks[bi].dim);
      int pp = 0, row_len = n;
      while (rel >= static_cast<size_t>(row_len)) {
        rel -= row_len;
        ++pp;
        --row_len;
      }
      return {static_cast<int>(bi), pp, pp + static_cast<int>(rel), false};
    }
    size_t sc = var - gram_entry_count;
    return {static_cast<int>(sc), 0, 0, true};  // scalar index in blk slot
  };

  auto to_sparse_canonical = [&](const SparseRow& row, bool with_slack,
                                 int slack_blk) -> SparseRow {
    SparseRow out;
    for (const auto& [var, coeff] : row.coeffs) {
      auto [blk_or_sc, pp, qq, is_scalar] = locate(var);
      if (!is_scalar) {
        out.coeffs.push_back({tri_index(blk_or_sc, pp, qq), coeff});
      } else {
        out.coeffs.push_back({tri_index(c.scalar_plus_block[blk_or_sc], 0, 0), coeff});
        if (c.scalar_minus_block[blk_or_sc] >= 0) {
          out.coeffs.push_back({tri_index(c.scalar_minus_block[blk_or_sc], 0, 0), -coeff});
        }
      }
    }
    if (with_slack) out.coeffs.push_back({tri_index(slack_blk, 0, 0), Rational(-1)});
    out.rhs = row.rhs;
    return out;
  };

  std::vector<SparseRow> canon_rows;
  for (const auto& row : p.eq_constraints) {
    canon_rows.push_back(to_sparse_canonical(row, false, -1));
  }
  for (size_t r = 0; r < p.ineq_constraints.size(); ++r) {
    canon_rows.push_back(to_sparse_canonical(p.ineq_constraints[r], true, slack_block[r]));
  }

  RowReduction red = select_independent_rows(canon_rows, canon_vars);
  if (red.inconsistent) {
    c.rows.clear();  // signalled to the caller via empty rows + flag below
    c.b.clear();
    c.b.push_back(std::numeric_limits<double>::quiet_NaN());  // marker
    return c;
  }

  for (size_t idx : red.kept) {
    const SparseRow& row = canon_rows[idx];
    std::vector<Canonical::Entry> entries;
    double norm2 = 0;
    for (const auto& [cv, coeff] : row.coeffs) {
      // invert tri_index
      size_t blk = 0;
      while (blk + 1 < blk_off.size() && blk_off[blk + 1] <= cv) ++blk;
      size_t rel = cv - blk_off[blk];
      int n = c.dims[blk];
      int pp = 0, row_len = n;
      while (rel >= static_cast<size_t>(row_len)) {
        rel -= row_len;
        ++pp;
        --row_len;
      }
      double v = rational_to_double(coeff);
      norm2 += v * v;
      entries.push_back({static_cast<int>(blk), pp, pp + static_cast<int>(rel), v});
    }
    // normalize rows; mixed degree-0 and degree-6 rows otherwise give the
    // Schur complement a needlessly bad condition number
    double scale = norm2 > 0 ? 1.0 / std::sqrt(norm2) : 1.0;
    for (auto& e : entries) e.v *= scale;
    c.rows.push_back(std::move(entries));
    c.b.push_back(rational_to_double(row.rhs) * scale);
  }

  // objective: given trace weights plus solver-added weights on split halves
  std::vector<double> scalar_cost(p.scalar_vars.size(), 0.0);
  for (const auto& [var, coeff] : p.objective) {
    auto [blk_or_sc, pp, qq, is_scalar] = locate(var);
    if (!is_scalar) {
      c.cost.push_back({blk_or_sc, pp, qq, rational_to_double(coeff)});
    } else {
      scalar_cost[blk_or_sc] += rational_to_double(coeff);
    }
  }
  for (size_t sc = 0; sc < p.scalar_vars.size(); ++sc) {
    if (p.scalar_vars[sc].nonneg) {
      if (scalar_cost[sc] != 0.0) {
        c.cost.push_back({c.scalar_plus_block[sc], 0, 0, scalar_cost[sc]});
      }
    } else if (opts.l1_on_free) {
      c.cost.push_back({c.scalar_plus_block[sc], 0, 0, 1.0 + scalar_cost[sc]});
      c.cost.push_back({c.scalar_minus_block[sc], 0, 0, 1.0 - scalar_cost[sc]});
    } else if (scalar_cost[sc] != 0.0) {
      c.cost.push_back({c.scalar_plus_block[sc], 0, 0, scalar_cost[sc]});
      c.cost.push_back({c.scalar_minus_block[sc], 0, 0, -scalar_cost[sc]});
    }
  }
  return c;
}

inline bool exact_inconsistency_marker(const Canonical& c) {
  return c.rows.empty() && c.b.size() == 1 && std::isnan(c.b[0]);
}

inline std::vector<MatrixXd> dense_constraint(const Canonical& c, size_t i) {
  std::vector<MatrixXd> mats;
  for (int d : c.dims) mats.push_back(MatrixXd::Zero(d, d));
  for (const auto& e : c.rows[i]) {
    if (e.p == e.q) {
      mats[e.blk](e.p, e.p) += e.v;
    } else {
      mats[e.blk](e.p, e.q) += e.v / 2;
      mats[e.blk](e.q, e.p) += e.v / 2;
    }
  }
  return mats;
}

struct IpmState {
  std::vector<MatrixXd> X, S;
  VectorXd y;
};

inline double dot_blocks(const std::vector<MatrixXd>& a, const std::vector<MatrixXd>& b) {
  double s = 0;
  for (size_t j = 0; j < a.size(); ++j) s += (a[j].array() * b[j].array()).sum();
  return s;
}

// largest step alpha with X + alpha*dX staying PSD, capped at 1
inline double step_to_boundary(const MatrixXd& X, const MatrixXd& dX) {
  Eigen::LLT<MatrixXd> llt(X);
  if (llt.info() != Eigen::Success) return 0.0;
  MatrixXd L = llt.matrixL();
  MatrixXd W = L.triangularView<Eigen::Lower>().solve(dX);
  W = L.triangularView<Eigen::Lower>().solve(W.transpose());
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (W + W.transpose()),
                                             Eigen::EigenvaluesOnly);
  double lmin = es.eigenvalues().minCoeff();
  if (lmin >= -1e-14) return 1.0;
  return std::min(1.0, -1.0 / lmin);
}

}  // namespace sdp_detail

inline SdpSolution solve(const SdpProblem& prob, const SdpOptions& opts = SdpOptions()) {
  using namespace sdp_detail;
  using Eigen::MatrixXd;
  using Eigen::VectorXd;

  SdpSolution out;
  Canonical c = canonicalize(prob, opts);
  auto finish = [&](const IpmState* st, SolveStatus status, double rp, double rd, double gap,
                    std::vector<double> trace, int iters) {
    out.status = status;
    out.primal_residual = rp;
    out.dual_residual = rd;
    out.duality_gap = gap;
    out.gap_trace = std::move(trace);
    out.iterations = iters;
    out.block_values.clear();
    out.scalar_values.clear();
    if (st != nullptr) {
      for (size_t bi = 0; bi < c.num_gram_blocks; ++bi) {
        MatrixXd sym = 0.5 * (st->X[bi] + st->X[bi].transpose());
        out.block_values.push_back(sym);
      }
      for (size_t sc = 0; sc < prob.scalar_vars.size(); ++sc) {
        double v = st->X[c.scalar_plus_block[sc]](0, 0);
        if (c.scalar_minus_block[sc] >= 0) v -= st->X[c.scalar_minus_block[sc]](0, 0);
        out.scalar_values.push_back(v);
      }
    } else {
      for (const auto& blk : prob.psd_blocks) {
        out.block_values.push_back(MatrixXd::Zero(blk.dim, blk.dim));
      }
      out.scalar_values.assign(prob.scalar_vars.size(), 0.0);
    }
    return out;
  };

  if (exact_inconsistency_marker(c)) {
    return finish(nullptr, SolveStatus::Infeasible, std::numeric_limits<double>::infinity(),
                  0, 0, {}, 0);
  }
  if (c.rows.empty()) {  // unconstrained: the zero matrix is optimal for a trace cost
    IpmState zero;
    for (int d : c.dims) zero.X.push_back(Eigen::MatrixXd::Zero(d, d));
    return finish(&zero, SolveStatus::Optimal, 0, 0, 0, {}, 0);
  }

  const size_t m = c.rows.size();
  const size_t nb = c.dims.size();
  std::vector<std::vector<MatrixXd>> A;
  for (size_t i = 0; i < m; ++i) A.push_back(dense_constraint(c, i));
  std::vector<MatrixXd> C;
  for (int d : c.dims) C.push_back(MatrixXd::Zero(d, d));
  for (const auto& e : c.cost) {
    if (e.p == e.q) {
      C[e.blk](e.p, e.p) += e.v;
    } else {
      C[e.blk](e.p, e.q) += e.v / 2;
      C[e.blk](e.q, e.p) += e.v / 2;
    }
  }
  VectorXd b(m);
  for (size_t i = 0; i < m; ++i) b(i) = c.b[i];

  double data_scale = std::max(1.0, b.lpNorm<Eigen::Infinity>());
  for (const auto& Ai : A) {
    for (const auto& blk : Ai) data_scale = std::max(data_scale, blk.lpNorm<Eigen::Infinity>());
  }

  IpmState st;
  const double rho = 10.0 * data_scale;
  for (size_t j = 0; j < nb; ++j) {
    st.X.push_back(MatrixXd::Identity(c.dims[j], c.dims[j]) * rho);
    st.S.push_back(MatrixXd::Identity(c.dims[j], c.dims[j]) * rho);
  }
  st.y = VectorXd::Zero(m);

  double nu = 0;
  for (int d : c.dims) nu += d;

  auto apply_A = [&](const std::vector<MatrixXd>& X) {
    VectorXd r(m);
    for (size_t i = 0; i < m; ++i) {
      double s = 0;
      for (const auto& e : c.rows[i]) {
        s += e.p == e.q ? e.v * X[e.blk](e.p, e.p) : e.v * X[e.blk](e.p, e.q);
      }
      r(i) = s;
    }
    return r;
  };
  auto adjoint_A = [&](const VectorXd& y) {
    std::vector<MatrixXd> Z;
    for (int d : c.dims) Z.push_back(MatrixXd::Zero(d, d));
    for (size_t i = 0; i < m; ++i) {
      if (y(i) == 0) continue;
      for (size_t j = 0; j < nb; ++j) Z[j] += y(i) * A[i][j];
    }
    return Z;
  };

  std::vector<double> gap_trace;
  IpmState best = st;
  double best_score = std::numeric_limits<double>::infinity();
  double best_rp = 0, best_rd = 0, best_gap = 0;
  int stall_count = 0;
  int gap_floor_hits = 0;
  const double bnorm = 1.0 + b.lpNorm<Eigen::Infinity>();
  double cnorm = 1.0;
  for (const auto& blk : C) cnorm = std::max(cnorm, blk.lpNorm<Eigen::Infinity>());

  int iter = 0;
  for (; iter < opts.max_iters; ++iter) {
    VectorXd rp = b - apply_A(st.X);
    std::vector<MatrixXd> Zy = adjoint_A(st.y);
    std::vector<MatrixXd> Rd;
    double rd_norm = 0;
    for (size_t j = 0; j < nb; ++j) {
      Rd.push_back(C[j] - st.S[j] - Zy[j]);
      rd_norm = std::max(rd_norm, Rd[j].lpNorm<Eigen::Infinity>());
    }
    double comp_gap = dot_blocks(st.X, st.S);
    double mu = comp_gap / nu;
    double pobj = dot_blocks(C, st.X);
    double dobj = b.dot(st.y);
    double rel_p = rp.lpNorm<Eigen::Infinity>() / bnorm;
    double rel_d = rd_norm / cnorm;
    double rel_gap = std::abs(pobj - dobj) / (1.0 + std::abs(pobj) + std::abs(dobj));

#ifdef POLYITP_IPM_TRACE
    std::fprintf(stderr, "it %3d relp=%9.3e reld=%9.3e relgap=%9.3e mu=%9.3e\n", iter, rel_p,
                 rel_d, rel_gap, mu);
#endif
    double score = std::max({rel_p, rel_d, rel_gap});
    if (score < best_score * 0.9) {
      stall_count = 0;
    } else {
      ++stall_count;
    }
    if (score < best_score) {
      best_score = score;
      best = st;
      best_rp = rel_p;
      best_rd = rel_d;
      best_gap = rel_gap;
    }

    if (rel_p <= opts.feas_tol && rel_d <= opts.feas_tol && rel_gap <= opts.gap_tol) {
      return finish(&st, SolveStatus::Optimal, rel_p, rel_d, rel_gap, std::move(gap_trace),
                    iter);
    }

    // Farkas test: y with b'y > 0 and A*(y) negative semidefinite certifies
    // primal infeasibility
    double by = b.dot(st.y);
    if (by > 1e-2 * data_scale) {
      double worst = -std::numeric_limits<double>::infinity();
      for (size_t j = 0; j < nb; ++j) {
        if (Zy[j].rows() == 1) {
          worst = std::max(worst, Zy[j](0, 0));
        } else {
          Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (Zy[j] + Zy[j].transpose()),
                                                     Eigen::EigenvaluesOnly);
          worst = std::max(worst, es.eigenvalues().maxCoeff());
        }
      }
      if (worst <= 1e-9 * by) {
        return finish(&best, SolveStatus::Infeasible, best_rp, best_rd, best_gap,
                      std::move(gap_trace), iter);
      }
    }
    if (stall_count > 25) break;

    // Nesterov-Todd scaling via the Cholesky/SVD construction: with
    // Lx = chol(X), Ls = chol(S) and Ls'Lx = U diag(sv) V', the matrix
    // G = Lx V diag(sv)^{-1/2} satisfies G'SG = G^{-1}XG^{-T} = diag(sv),
    // so both cone variables become the same diagonal in the scaled space.
    std::vector<MatrixXd> G, Ginv;
    std::vector<VectorXd> lam;
    bool scaling_ok = true;
    for (size_t j = 0; j < nb; ++j) {
      Eigen::LLT<MatrixXd> lltx(st.X[j]), llts(st.S[j]);
      if (lltx.info() != Eigen::Success || llts.info() != Eigen::Success) {
        scaling_ok = false;
        break;
      }
      MatrixXd Lx = lltx.matrixL();
      MatrixXd Ls = llts.matrixL();
      Eigen::JacobiSVD<MatrixXd> svd(Ls.transpose() * Lx,
                                     Eigen::ComputeFullU | Eigen::ComputeFullV);
      VectorXd sv = svd.singularValues();
      if (sv.minCoeff() <= 0) {
        scaling_ok = false;
        break;
      }
      VectorXd isqrt = sv.array().sqrt().inverse();
      MatrixXd Gj = Lx * svd.matrixV() * isqrt.asDiagonal();
      MatrixXd Ginvj = sv.array().sqrt().matrix().asDiagonal() * svd.matrixV().transpose() *
                       Lx.triangularView<Eigen::Lower>().solve(
                           MatrixXd::Identity(c.dims[j], c.dims[j]));
      G.push_back(std::move(Gj));
      Ginv.push_back(std::move(Ginvj));
      lam.push_back(sv);
    }
    if (!scaling_ok) break;

    // scaled constraints and Schur complement M[i][k] = sum_j <A^_ij, A^_kj>
    std::vector<std::vector<MatrixXd>> Ahat(m);
    for (size_t i = 0; i < m; ++i) {
      Ahat[i].resize(nb);
      for (size_t j = 0; j < nb; ++j) {
        if (A[i][j].isZero(0)) continue;
        MatrixXd t = G[j].transpose() * A[i][j] * G[j];
        Ahat[i][j] = 0.5 * (t + t.transpose());
      }
    }
    MatrixXd M = MatrixXd::Zero(m, m);
    for (size_t i = 0; i < m; ++i) {
      for (size_t k = 0; k <= i; ++k) {
        double s = 0;
        for (size_t j = 0; j < nb; ++j) {
          if (Ahat[i][j].size() == 0 || Ahat[k][j].size() == 0) continue;
          s += (Ahat[i][j].array() * Ahat[k][j].array()).sum();
        }
        M(i, k) = s;
        M(k, i) = s;
      }
    }
    Eigen::LDLT<MatrixXd> mfact(M);
    if (mfact.info() != Eigen::Success) break;

    std::vector<MatrixXd> Rdhat(nb), Einv(nb);
    for (size_t j = 0; j < nb; ++j) {
      MatrixXd t = G[j].transpose() * Rd[j] * G[j];
      Rdhat[j] = 0.5 * (t + t.transpose());
      MatrixXd e(c.dims[j], c.dims[j]);
      for (int p = 0; p < c.dims[j]; ++p) {
        for (int q = 0; q < c.dims[j]; ++q) e(p, q) = 2.0 / (lam[j](p) + lam[j](q));
      }
      Einv[j] = e;  // elementwise inverse of the scaled Lyapunov operator
    }

    // scaled Newton system:  dXhat + dShat = Einv o Rchat,
    //                        dShat = Rdhat - sum_k dy_k Ahat_k,
    //                        <Ahat_i, dXhat> = rp_i
    auto solve_direction = [&](const std::vector<MatrixXd>& Rchat, IpmState& d,
                               std::vector<MatrixXd>& dXhat_out,
                               std::vector<MatrixXd>& dShat_out) {
      VectorXd rhs = rp;
      for (size_t i = 0; i < m; ++i) {
        double s = 0;
        for (size_t j = 0; j < nb; ++j) {
          if (Ahat[i][j].size() == 0) continue;
          MatrixXd t = Einv[j].array() * Rchat[j].array() - Rdhat[j].array();
          s += (Ahat[i][j].array() * t.array()).sum();
        }
        rhs(i) -= s;
      }
      d.y = mfact.solve(rhs);
      d.y += mfact.solve(rhs - M * d.y);  // one round of iterative refinement
      d.S.assign(nb, MatrixXd());
      d.X.assign(nb, MatrixXd());
      dXhat_out.assign(nb, MatrixXd());
      dShat_out.assign(nb, MatrixXd());
      for (size_t j = 0; j < nb; ++j) {
        MatrixXd dShat = Rdhat[j];
        for (size_t i = 0; i < m; ++i) {
          if (Ahat[i][j].size() == 0) continue;
          dShat -= d.y(i) * Ahat[i][j];
        }
        MatrixXd dXhat = (Einv[j].array() * Rchat[j].array()).matrix() - dShat;
        d.X[j] = G[j] * dXhat * G[j].transpose();
        d.X[j] = 0.5 * (d.X[j] + d.X[j].transpose());
        d.S[j] = Ginv[j].transpose() * dShat * Ginv[j];
        d.S[j] = 0.5 * (d.S[j] + d.S[j].transpose());
        dXhat_out[j] = std::move(dXhat);
        dShat_out[j] = std::move(dShat);
      }
    };

    // step to the cone boundary, computed in the scaled space where the
    // current iterate is diag(lam)
    auto scaled_step = [&](const std::vector<MatrixXd>& dhat) {
      double alpha = 1.0;
      for (size_t j = 0; j < nb; ++j) {
        VectorXd il = lam[j].array().sqrt().inverse();
        MatrixXd B = il.asDiagonal() * dhat[j] * il.asDiagonal();
        Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (B + B.transpose()),
                                                   Eigen::EigenvaluesOnly);
        double lmin = es.eigenvalues().minCoeff();
        if (lmin < -1e-14) alpha = std::min(alpha, -1.0 / lmin);
      }
      return alpha;
    };

    // predictor
    std::vector<MatrixXd> Rchat(nb);
    for (size_t j = 0; j < nb; ++j) {
      VectorXd l2 = -lam[j].array().square();
      Rchat[j] = MatrixXd(l2.asDiagonal());
    }
    IpmState aff;
    std::vector<MatrixXd> affXhat, affShat;
    solve_direction(Rchat, aff, affXhat, affShat);
    double ap = scaled_step(affXhat);
    double ad = scaled_step(affShat);
    double gap_aff = 0;
    for (size_t j = 0; j < nb; ++j) {
      gap_aff += ((st.X[j] + ap * aff.X[j]).array() * (st.S[j] + ad * aff.S[j]).array()).sum();
    }
    double sigma = std::pow(std::max(0.0, gap_aff / comp_gap), 3);
    double sigma_floor = std::max(rel_p, rel_d) > opts.feas_tol * 10 ? 0.05 : 1e-10;
    sigma = std::min(1.0, std::max(sigma_floor, sigma));

    // corrector with the scaled second-order term
    for (size_t j = 0; j < nb; ++j) {
      MatrixXd second = 0.5 * (affXhat[j] * affShat[j] + affShat[j] * affXhat[j]);
      VectorXd l2 = lam[j].array().square();
      Rchat[j] = sigma * mu * MatrixXd::Identity(c.dims[j], c.dims[j]) -
                 MatrixXd(l2.asDiagonal()) - second;
    }
    IpmState dir;
    std::vector<MatrixXd> dirXhat, dirShat;
    solve_direction(Rchat, dir, dirXhat, dirShat);
    double tau = std::max(rel_p, rel_d) < 1e-5 && rel_gap < 1e-3 ? 0.98 : 0.95;
    ap = std::min(1.0, tau * scaled_step(dirXhat));
    ad = std::min(1.0, tau * scaled_step(dirShat));
#ifdef POLYITP_IPM_TRACE
    std::fprintf(stderr, "      sigma=%9.3e ap=%9.3e ad=%9.3e\n", sigma, ap, ad);
#endif

    // Near feasibility the duality gap is the only quantity left to drive
    // down; keep it non-increasing there by shrinking the step if needed
    // (asymmetric steps can raise it to first order, equal steps cannot once
    // centering is on).  Away from feasibility the residuals rule and the
    // gap may move freely.  Repeated step collapse marks the numerical
    // degeneracy floor; grinding further cannot improve the iterate.
    const bool in_gap_regime = rel_p <= 1e-6 && rel_d <= 1e-6;
    IpmState next = st;
    bool collapsed = false;
    for (int attempt = 0; attempt < 24; ++attempt) {
      next = st;
      for (size_t j = 0; j < nb; ++j) {
        next.X[j] += ap * dir.X[j];
        next.S[j] += ad * dir.S[j];
      }
      next.y = st.y + ad * dir.y;
      if (!in_gap_regime) break;
      double g = dot_blocks(next.X, next.S);
      if (g <= comp_gap * (1 + 1e-9) + 1e-16) break;
      if (attempt == 0) {
        double a = std::min(ap, ad);  // equal steps first
        ap = a;
        ad = a;
      } else {
        ap *= 0.5;
        ad *= 0.5;
      }
      if (attempt == 23) collapsed = true;
      if (ap < 1e-4) collapsed = true;
    }
    st = next;
    if (in_gap_regime) gap_trace.push_back(dot_blocks(st.X, st.S));
    if (collapsed) {
      ++gap_floor_hits;
      if (gap_floor_hits >= 3) break;
    } else {
      gap_floor_hits = 0;
    }
  }

  // No Farkas certificate emerged during the iterations: classify by the
  // best residuals reached.  Degenerate optimal faces floor the gap around
  // 1e-6 in doubles; a primal-dual pair feasible to tolerance with such a
  // gap is still a perfectly good rounding candidate, hence NearFeasible.
  // (False infeasibility claims are worse than a stall; the caller treats
  // both as failures.)
  SolveStatus status = (best_rp <= 100 * opts.feas_tol && best_rd <= 100 * opts.feas_tol &&
                        best_gap <= 1e-4)
                           ? SolveStatus::NearFeasible
                           : SolveStatus::Stalled;
  return finish(&best, status, best_rp, best_rd, best_gap, std::move(gap_trace), iter);
}

// Flat candidate vector in SymbolTable layout (Gram upper triangles, then
// cone scalars, then ideal-multiplier coefficients).
inline std::vector<double> flatten(const SymbolTable& table, const SdpSolution& sol) {
  std::vector<double> v(table.num_vars, 0.0);
  for (size_t bi = 0; bi < table.blocks.size(); ++bi) {
    const auto& blk = table.blocks[bi];
    for (size_t p = 0; p < blk.dim(); ++p) {
      for (size_t q = p; q < blk.dim(); ++q) {
        v[table.entry_index(bi, p, q)] = sol.block_values[bi](p, q);
      }
    }
  }
  for (size_t k = 0; k < table.gammas.size(); ++k) {
    v[table.gamma_index(k)] = sol.scalar_values[k];
  }
  for (size_t k = 0; k < table.betas.size(); ++k) {
    v[table.beta_index(k)] = sol.scalar_values[table.gammas.size() + k];
  }
  return v;
}

// ---------------------------------------------------------------------------
// SDPA sparse interchange
//
// Problems are written in the SDPA sparse format over the canonical cone
// (PSD blocks first, then one diagonal block holding the nonnegative
// scalars, the split halves of free scalars and the inequality slacks).
// Constraint matrices are the A_i of <A_i,X> = b_i, matrix 0 is the cost.

namespace sdp_detail {

struct DiagLayout {
  // diagonal-block position (0-based) of each scalar's plus/minus half and
  // of each inequality slack
  std::vector<int> plus_pos, minus_pos, slack_pos;
  int size = 0;
};

inline DiagLayout diag_layout(const SdpProblem& p) {
  DiagLayout d;
  int at = 0;
  for (const auto& sc : p.scalar_vars) {
    d.plus_pos.push_back(at++);
    d.minus_pos.push_back(sc.nonneg ? -1 : at++);
  }
  for (size_t r = 0; r < p.ineq_constraints.size(); ++r) d.slack_pos.push_back(at++);
  d.size = at;
  return d;
}

struct SdpaEntry {
  int matno, blk, i, j;  // 1-based per the format
  double v;
};

inline void row_entries(const SdpProblem& p, const DiagLayout& d, const SparseRow& row,
                        int matno, int slack_pos, std::vector<SdpaEntry>& out) {
  const int diag_blk = static_cast<int>(p.psd_blocks.size()) + 1;
  size_t gram_entry_count = 0;
  std::vector<size_t> gram_off(p.psd_blocks.size());
  for (size_t bi = 0; bi < p.psd_blocks.size(); ++bi) {
    gram_off[bi] = gram_entry_count;
    gram_entry_count += p.psd_blocks[bi].dim * (p.psd_blocks[bi].dim + 1) / 2;
  }
  for (const auto& [var, coeff] : row.coeffs) {
    double v = rational_to_double(coeff);
    if (var < gram_entry_count) {
      size_t bi = 0;
      while (bi + 1 < gram_off.size() && gram_off[bi + 1] <= var) ++bi;
      size_t rel = var - gram_off[bi];
      int n = static_cast<int>(p.psd_blocks[bi].dim);
      int pp = 0, row_len = n;
      while (rel >= static_cast<size_t>(row_len)) {
        rel -= row_len;
        ++pp;
        --row_len;
      }
      int qq = pp + static_cast<int>(rel);
      // off-diagonal coefficients address X_pq + X_qp, so halve
      out.push_back({matno, static_cast<int>(bi) + 1, pp + 1, qq + 1,
                     pp == qq ? v : v / 2});
    } else {
      size_t sc = var - gram_entry_count;
      out.push_back({matno, diag_blk, d.plus_pos[sc] + 1, d.plus_pos[sc] + 1, v});
      if (d.minus_pos[sc] >= 0) {
        out.push_back({matno, diag_blk, d.minus_pos[sc] + 1, d.minus_pos[sc] + 1, -v});
      }
    }
  }
  if (slack_pos >= 0) {
    out.push_back({matno, diag_blk, slack_pos + 1, slack_pos + 1, -1.0});
  }
}

}  // namespace sdp_detail

inline std::string export_sdpa(const SdpProblem& p) {
  using namespace sdp_detail;
  DiagLayout d = diag_layout(p);
  std::ostringstream os;
  os.precision(17);
  os << "\"problem in SDPA sparse format: constraints <A_i,X>=b_i, cost matrix 0\"\n";
  const size_t m = p.eq_constraints.size() + p.ineq_constraints.size();
  os << m << " = mDIM\n";
  const int nblocks = static_cast<int>(p.psd_blocks.size()) + (d.size > 0 ? 1 : 0);
  os << nblocks << " = nBLOCK\n";
  for (size_t bi = 0; bi < p.psd_blocks.size(); ++bi) {
    os << p.psd_blocks[bi].dim << (bi + 1 < p.psd_blocks.size() || d.size > 0 ? " " : "");
  }
  if (d.size > 0) os << -d.size;
  os << "\n";
  for (size_t i = 0; i < m; ++i) {
    double rhs = rational_to_double(
        i < p.eq_constraints.size() ? p.eq_constraints[i].rhs
                                    : p.ineq_constraints[i - p.eq_constraints.size()].rhs);
    os << rhs << (i + 1 < m ? " " : "");
  }
  os << "\n";
  std::vector<SdpaEntry> entries;
  {  // cost
    SparseRow obj;
    obj.coeffs = p.objective;
    row_entries(p, d, obj, 0, -1, entries);
  }
  for (size_t i = 0; i < p.eq_constraints.size(); ++i) {
    row_entries(p, d, p.eq_constraints[i], static_cast<int>(i) + 1, -1, entries);
  }
  for (size_t r = 0; r < p.ineq_constraints.size(); ++r) {
    row_entries(p, d, p.ineq_constraints[r],
                static_cast<int>(p.eq_constraints.size() + r) + 1, d.slack_pos[r], entries);
  }
  for (const auto& e : entries) {
    os << e.matno << " " << e.blk << " " << e.i << " " << e.j << " " << e.v << "\n";
  }
  return os.str();
}

// Structural reading of an SDPA sparse file (round-trip checks).
struct SdpaProblemView {
  size_t m = 0;
  std::vector<int> block_sizes;  // negative = diagonal block
  std::vector<double> rhs;
  std::vector<std::tuple<int, int, int, int, double>> entries;
};

inline SdpaProblemView import_sdpa_problem(const std::string& text) {
  SdpaProblemView v;
  std::istringstream is(text);
  std::string line;
  int stage = 0;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '"' || line[0] == '*') continue;
    std::istringstream ls(line);
    if (stage == 0) {
      ls >> v.m;
      ++stage;
    } else if (stage == 1) {
      ++stage;  // nBLOCK, redundant with the size line
    } else if (stage == 2) {
      int s;
      while (ls >> s) v.block_sizes.push_back(s);
      ++stage;
    } else if (stage == 3) {
      double r;
      while (ls >> r) v.rhs.push_back(r);
      ++stage;
    } else {
      int matno, blk, i, j;
      double val;
      if (ls >> matno >> blk >> i >> j >> val) {
        v.entries.push_back({matno, blk, i, j, val});
      } else {
        throw std::runtime_error("import_sdpa_problem: malformed entry line: " + line);
      }
    }
  }
  if (stage < 4) throw std::runtime_error("import_sdpa_problem: truncated file");
  if (v.rhs.size() != v.m) {
    throw std::runtime_error("import_sdpa_problem: rhs count does not match mDIM");
  }
  return v;
}

// Primal solution interchange: comment lines, then one entry per line,
//   <block> <row> <col> <value>
// 1-based over the exported cone (upper triangle; diagonal block entries
// have row == col).  Residuals are recomputed locally, never read.
inline SdpSolution import_solution(const SdpProblem& p, const std::string& text) {
  using namespace sdp_detail;
  DiagLayout d = diag_layout(p);
  const int diag_blk = static_cast<int>(p.psd_blocks.size()) + 1;
  std::vector<Eigen::MatrixXd> blocks;
  for (const auto& blk : p.psd_blocks) {
    blocks.push_back(Eigen::MatrixXd::Zero(blk.dim, blk.dim));
  }
  Eigen::VectorXd diag = Eigen::VectorXd::Zero(d.size);
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#' || line[0] == '"' || line[0] == '*') continue;
    std::istringstream ls(line);
    int blk, i, j;
    double v;
    if (!(ls >> blk >> i >> j >> v)) {
      throw std::runtime_error("import_solution: malformed line " + std::to_string(lineno));
    }
    if (blk >= 1 && blk <= static_cast<int>(p.psd_blocks.size())) {
      int n = static_cast<int>(p.psd_blocks[blk - 1].dim);
      if (i < 1 || j < 1 || i > n || j > n) {
        throw std::runtime_error("import_solution: entry out of range on line " +
                                 std::to_string(lineno));
      }
      blocks[blk - 1](i - 1, j - 1) = v;
      blocks[blk - 1](j - 1, i - 1) = v;
    } else if (blk == diag_blk && d.size > 0) {
      if (i != j || i < 1 || i > d.size) {
        throw std::runtime_error("import_solution: bad diagonal entry on line " +
                                 std::to_string(lineno));
      }
      diag(i - 1) = v;
    } else {
      throw std::runtime_error("import_solution: block index out of range on line " +
                               std::to_string(lineno));
    }
  }
  SdpSolution sol;
  sol.block_values = std::move(blocks);
  for (size_t sc = 0; sc < p.scalar_vars.size(); ++sc) {
    double v = diag(d.plus_pos[sc]);
    if (d.minus_pos[sc] >= 0) v -= diag(d.minus_pos[sc]);
    sol.scalar_values.push_back(v);
  }
  // recompute the primal residual against every original row
  auto value_of = [&](size_t var) {
    size_t gram_entry_count = 0;
    for (size_t bi = 0; bi < p.psd_blocks.size(); ++bi) {
      size_t cnt = p.psd_blocks[bi].dim * (p.psd_blocks[bi].dim + 1) / 2;
      if (var < gram_entry_count + cnt) {
        size_t rel = var - gram_entry_count;
        int n = static_cast<int>(p.psd_blocks[bi].dim);
        int pp = 0, row_len = n;
        while (rel >= static_cast<size_t>(row_len)) {
          rel -= row_len;
          ++pp;
          --row_len;
        }
        return sol.block_values[bi](pp, pp + static_cast<int>(rel));
      }
      gram_entry_count += cnt;
    }
    return sol.scalar_values[var - gram_entry_count];
  };
  double rp = 0;
  for (const auto& row : p.eq_constraints) {
    double s = -rational_to_double(row.rhs);
    for (const auto& [var, coeff] : row.coeffs) s += rational_to_double(coeff) * value_of(var);
    rp = std::max(rp, std::abs(s));
  }
  for (const auto& row : p.ineq_constraints) {
    double s = -rational_to_double(row.rhs);
    for (const auto& [var, coeff] : row.coeffs) s += rational_to_double(coeff) * value_of(var);
    rp = std::max(rp, std::max(0.0, -s));
  }
  sol.primal_residual = rp;
  sol.dual_residual = std::numeric_limits<double>::quiet_NaN();  // no dual data in files
  sol.duality_gap = std::numeric_limits<double>::quiet_NaN();
  sol.status = rp <= 1e-6 ? SolveStatus::NearFeasible : SolveStatus::Stalled;
  sol.iterations = 0;
  return sol;
}

}  // namespace polyitp
