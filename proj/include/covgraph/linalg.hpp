#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <string>

#include "covgraph/error.hpp"
#include "covgraph/graph.hpp"

namespace covgraph {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Relative pivot floor for the positive-definiteness test.
inline constexpr double kPdPivotTolerance = 1e-12;

/// Positive definite iff the pivoted LDL' factorization has all pivots above
/// kPdPivotTolerance times the largest diagonal entry.
inline bool is_positive_definite(const Matrix& m) {
  if (m.rows() != m.cols() || m.rows() == 0) return false;
  if (!m.allFinite()) return false;
  const double scale = m.diagonal().maxCoeff();
  if (!(scale > 0.0)) return false;
  Eigen::LDLT<Matrix> ldlt(m);
  if (ldlt.info() != Eigen::Success) return false;
  return ldlt.vectorD().minCoeff() > kPdPivotTolerance * scale;
}

inline void require_positive_definite(const Matrix& m, const std::string& what) {
  if (!is_positive_definite(m)) throw NumericalError(what + " is not positive definite");
}

inline double smallest_eigenvalue(const Matrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(m, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

inline Matrix symmetrized(const Matrix& m) { return 0.5 * (m + m.transpose()); }

/// Inverse of a symmetric positive definite matrix via Cholesky.
inline Matrix spd_inverse(const Matrix& m) {
  Eigen::LLT<Matrix> llt(m);
  if (llt.info() != Eigen::Success) throw NumericalError("matrix is not positive definite");
  Matrix inv = llt.solve(Matrix::Identity(m.rows(), m.cols()));
  return symmetrized(inv);
}

inline double log_det_spd(const Matrix& m) {
  Eigen::LLT<Matrix> llt(m);
  if (llt.info() != Eigen::Success) throw NumericalError("matrix is not positive definite");
  return 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
}

inline Matrix sub(const Matrix& m, const VertexSet& rows, const VertexSet& cols) {
  return m(rows, cols);
}

inline Vector sub(const Vector& v, const VertexSet& idx) { return v(idx); }

/// True iff every entry of m outside the free pairs of g is exactly zero.
inline bool respects_pattern(const Matrix& m, const CovarianceGraph& g) {
  for (std::size_t i = 0; i < g.size(); ++i)
    for (std::size_t j = 0; j < g.size(); ++j)
      if (i != j && !g.adjacent(i, j) && m(i, j) != 0.0) return false;
  return true;
}

/// Zeroes the entries of m that are fixed by the graph.
inline void apply_pattern(Matrix& m, const CovarianceGraph& g) {
  for (std::size_t i = 0; i < g.size(); ++i)
    for (std::size_t j = 0; j < g.size(); ++j)
      if (i != j && !g.adjacent(i, j)) m(i, j) = 0.0;
}

inline double max_abs_diff(const Matrix& a, const Matrix& b) {
  return (a - b).cwiseAbs().maxCoeff();
}

}  // namespace covgraph
