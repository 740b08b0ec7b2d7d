#pragma once

// Small exact-arithmetic linear algebra kit: fraction-free Bareiss
// determinants and rational row reduction.  Row reduction is used to pick a
// linearly independent subset of SDP constraint rows before they reach the
// floating-point solver (redundant rows would make the Schur complement
// singular); the determinant routine backs the principal-minor PSD test.

#include <cstddef>
#include <stdexcept>
#include <utility>
#include <vector>

#include "polyitp/rational.hpp"

namespace polyitp {

using IntMatrix = std::vector<std::vector<Int>>;
using RationalMatrix = std::vector<std::vector<Rational>>;

// Determinant by Bareiss fraction-free elimination.  All intermediate
// divisions are exact.
inline Int bareiss_determinant(IntMatrix m) {
  const size_t n = m.size();
  if (n == 0) return Int(1);
  Int sign = 1;
  Int prev = 1;
  for (size_t k = 0; k + 1 < n; ++k) {
    if (m[k][k] == 0) {
      size_t swap_row = k + 1;
      while (swap_row < n && m[swap_row][k] == 0) ++swap_row;
      if (swap_row == n) return Int(0);
      std::swap(m[k], m[swap_row]);
      sign = -sign;
    }
    for (size_t i = k + 1; i < n; ++i) {
      for (size_t j = k + 1; j < n; ++j) {
        m[i][j] = (m[i][j] * m[k][k] - m[i][k] * m[k][j]) / prev;
      }
      m[i][k] = 0;
    }
    prev = m[k][k];
  }
  return sign * m[n - 1][n - 1];
}

// Rational determinant: clear denominators row by row, then run Bareiss.
inline Rational determinant(const RationalMatrix& m) {
  const size_t n = m.size();
  if (n == 0) return Rational(1);
  IntMatrix im(n, std::vector<Int>(n));
  Rational scale(1);
  for (size_t i = 0; i < n; ++i) {
    Int lcm = 1;
    for (size_t j = 0; j < n; ++j) {
      Int d = denominator(m[i][j]);
      lcm = lcm / gcd(lcm, d) * d;
    }
    for (size_t j = 0; j < n; ++j) {
      im[i][j] = numerator(m[i][j]) * (lcm / denominator(m[i][j]));
    }
    scale = scale / Rational(lcm);
  }
  return scale * Rational(bareiss_determinant(std::move(im)));
}

// One linear row over a flat variable space.
struct SparseRow {
  std::vector<std::pair<size_t, Rational>> coeffs;  // (variable index, coefficient)
  Rational rhs;
};

struct RowReduction {
  std::vector<size_t> kept;      // indices of an independent generating subset
  bool inconsistent = false;     // some row reduced to 0 = nonzero
  size_t inconsistent_row = 0;
};

// Gaussian elimination over the rationals, processing rows in order and
// keeping exactly those that increase the rank of [A | b].
inline RowReduction select_independent_rows(const std::vector<SparseRow>& rows,
                                            size_t num_vars) {
  RowReduction result;
  // reduced pivot rows, dense over num_vars + 1 (last column = rhs)
  std::vector<std::vector<Rational>> pivots;
  std::vector<size_t> pivot_cols;
  for (size_t r = 0; r < rows.size(); ++r) {
    std::vector<Rational> dense(num_vars + 1, Rational(0));
    for (const auto& [idx, c] : rows[r].coeffs) dense[idx] += c;
    dense[num_vars] = rows[r].rhs;
    for (size_t p = 0; p < pivots.size(); ++p) {
      const Rational& factor = dense[pivot_cols[p]];
      if (factor == 0) continue;
      Rational f = factor;  // pivot rows are normalized to leading 1
      for (size_t j = 0; j <= num_vars; ++j) {
        if (!(pivots[p][j] == 0)) dense[j] -= f * pivots[p][j];
      }
    }
    size_t col = 0;
    while (col < num_vars && dense[col] == 0) ++col;
    if (col == num_vars) {
      if (!(dense[num_vars] == 0)) {
        result.inconsistent = true;
        result.inconsistent_row = r;
        return result;
      }
      continue;  // dependent row, drop
    }
    Rational inv = Rational(1) / dense[col];
    for (size_t j = col; j <= num_vars; ++j) dense[j] *= inv;
    pivots.push_back(std::move(dense));
    pivot_cols.push_back(col);
    result.kept.push_back(r);
  }
  return result;
}

// Basis of the null space of the homogeneous system (rhs ignored), used by
// property tests to fabricate exact solutions of the equality constraints.
inline std::vector<std::vector<Rational>> nullspace_basis(const std::vector<SparseRow>& rows,
                                                          size_t num_vars) {
  std::vector<std::vector<Rational>> mat;
  for (const auto& row : rows) {
    std::vector<Rational> dense(num_vars, Rational(0));
    for (const auto& [idx, c] : row.coeffs) dense[idx] += c;
    mat.push_back(std::move(dense));
  }
  // forward elimination with row-echelon bookkeeping
  std::vector<size_t> pivot_col_of_row;
  size_t rank = 0;
  for (size_t col = 0; col < num_vars && rank < mat.size(); ++col) {
    size_t sel = rank;
    while (sel < mat.size() && mat[sel][col] == 0) ++sel;
    if (sel == mat.size()) continue;
    std::swap(mat[rank], mat[sel]);
    Rational inv = Rational(1) / mat[rank][col];
    for (size_t j = col; j < num_vars; ++j) mat[rank][j] *= inv;
    for (size_t i = 0; i < mat.size(); ++i) {
      if (i == rank || mat[i][col] == 0) continue;
      Rational f = mat[i][col];
      for (size_t j = col; j < num_vars; ++j) mat[i][j] -= f * mat[rank][j];
    }
    pivot_col_of_row.push_back(col);
    ++rank;
  }
  std::vector<bool> is_pivot(num_vars, false);
  for (size_t c : pivot_col_of_row) is_pivot[c] = true;
  std::vector<std::vector<Rational>> basis;
  for (size_t freec = 0; freec < num_vars; ++freec) {
    if (is_pivot[freec]) continue;
    std::vector<Rational> v(num_vars, Rational(0));
    v[freec] = 1;
    for (size_t r = 0; r < rank; ++r) {
      v[pivot_col_of_row[r]] = -mat[r][freec];
    }
    basis.push_back(std::move(v));
  }
  return basis;
}

}  // namespace polyitp
