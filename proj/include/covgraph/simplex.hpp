#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <vector>

namespace covgraph::lp {

enum class LpStatus { Optimal, Infeasible, Unbounded };

struct LpResult {
  LpStatus status = LpStatus::Infeasible;
  double value = 0.0;
  Eigen::VectorXd x;
};

namespace detail {

// Dense tableau; last column holds the right-hand side, last row the reduced costs.
class Tableau {
 public:
  Tableau(Eigen::MatrixXd t, std::vector<int> basis) : t_(std::move(t)), basis_(std::move(basis)) {}

  Eigen::MatrixXd& data() { return t_; }
  std::vector<int>& basis() { return basis_; }

  // Bland's rule; columns with allowed[j] == false never enter.
  LpStatus optimize(const std::vector<char>& allowed, double eps) {
    const Eigen::Index m = t_.rows() - 1;
    const Eigen::Index rhs = t_.cols() - 1;
    for (int guard = 0; guard < 100000; ++guard) {
      Eigen::Index enter = -1;
      for (Eigen::Index j = 0; j < rhs; ++j)
        if (allowed[j] && t_(m, j) < -eps) {
          enter = j;
          break;
        }
      if (enter < 0) return LpStatus::Optimal;
      Eigen::Index leave = -1;
      double best = 0.0;
      for (Eigen::Index i = 0; i < m; ++i) {
        if (t_(i, enter) <= eps) continue;
        const double ratio = t_(i, rhs) / t_(i, enter);
        if (leave < 0 || ratio < best - eps ||
            (std::abs(ratio - best) <= eps && basis_[i] < basis_[leave])) {
          leave = i;
          best = ratio;
        }
      }
      if (leave < 0) return LpStatus::Unbounded;
      pivot(leave, enter);
    }
    return LpStatus::Unbounded;
  }

  void pivot(Eigen::Index row, Eigen::Index col) {
    t_.row(row) /= t_(row, col);
    for (Eigen::Index i = 0; i < t_.rows(); ++i)
      if (i != row && t_(i, col) != 0.0) t_.row(i) -= t_(i, col) * t_.row(row);
    basis_[row] = static_cast<int>(col);
  }

 private:
  Eigen::MatrixXd t_;
  std::vector<int> basis_;
};

}  // namespace detail

/// Two-phase simplex for  min c'x  subject to  A x = b, x >= 0.
inline LpResult minimize(Eigen::MatrixXd a, Eigen::VectorXd b, const Eigen::VectorXd& c, double eps = 1e-11) {
  const Eigen::Index m = a.rows(), n = a.cols();
  for (Eigen::Index i = 0; i < m; ++i)
    if (b(i) < 0) {
      a.row(i) *= -1.0;
      b(i) *= -1.0;
    }
  // Columns: n structural, m artificial, rhs.
  Eigen::MatrixXd t = Eigen::MatrixXd::Zero(m + 1, n + m + 1);
  t.topLeftCorner(m, n) = a;
  t.block(0, n, m, m).setIdentity();
  t.col(n + m).head(m) = b;
  std::vector<int> basis(m);
  for (Eigen::Index i = 0; i < m; ++i) basis[i] = static_cast<int>(n + i);
  // Phase one: minimize the sum of artificials.
  for (Eigen::Index i = 0; i < m; ++i) t.row(m) -= t.row(i);
  t.block(m, n, 1, m).setZero();

  detail::Tableau tab(std::move(t), std::move(basis));
  std::vector<char> allowed(n + m, 1);
  tab.optimize(allowed, eps);
  const double scale = std::max(1.0, b.cwiseAbs().maxCoeff());
  if (-tab.data()(m, n + m) > 1e-9 * scale) return {LpStatus::Infeasible, 0.0, {}};

  // Drive artificials out of the basis where possible.
  for (Eigen::Index i = 0; i < m; ++i) {
    if (tab.basis()[i] < n) continue;
    for (Eigen::Index j = 0; j < n; ++j)
      if (std::abs(tab.data()(i, j)) > 1e-9) {
        tab.pivot(i, j);
        break;
      }
  }

  // Phase two with the true objective.
  auto& d = tab.data();
  d.row(m).setZero();
  d.block(m, 0, 1, n) = c.transpose();
  for (Eigen::Index i = 0; i < m; ++i) {
    const int bj = tab.basis()[i];
    if (bj < n && d(m, bj) != 0.0) d.row(m) -= d(m, bj) * d.row(i);
  }
  for (Eigen::Index j = n; j < n + m; ++j) allowed[j] = 0;
  const auto status = tab.optimize(allowed, eps);
  if (status == LpStatus::Unbounded) return {LpStatus::Unbounded, 0.0, {}};

  LpResult res;
  res.status = LpStatus::Optimal;
  res.x = Eigen::VectorXd::Zero(n);
  for (Eigen::Index i = 0; i < m; ++i)
    if (tab.basis()[i] < n) res.x(tab.basis()[i]) = d(i, n + m);
  res.value = c.dot(res.x);
  return res;
}

}  // namespace covgraph::lp
