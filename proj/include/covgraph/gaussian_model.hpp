#pragma once

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "covgraph/graph.hpp"
#include "covgraph/linalg.hpp"

namespace covgraph {

/// Sample size, mean vector and empirical covariance (divisor n).
struct SampleStats {
  std::size_t n = 0;
  Vector mean;
  Matrix cov;
  std::vector<std::string> labels;
  // Use n - 1 in place of n in the likelihood (profile-likelihood convention).
  bool adjust_n = false;

  std::size_t dimension() const { return static_cast<std::size_t>(cov.rows()); }
  double effective_n() const {
    return adjust_n ? static_cast<double>(n) - 1.0 : static_cast<double>(n);
  }
  bool positive_definite() const { return is_positive_definite(cov); }
};

/// Column means and covariance (divisor n) of an n x p data table.
inline SampleStats sample_stats(const Matrix& data, std::vector<std::string> labels = {}) {
  if (data.rows() < 2) throw InputError("need at least two observations");
  if (!data.allFinite()) throw InputError("data contain non-finite values");
  if (labels.empty()) {
    for (Eigen::Index j = 0; j < data.cols(); ++j) labels.push_back("X" + std::to_string(j + 1));
  }
  if (labels.size() != static_cast<std::size_t>(data.cols()))
    throw InputError("label count does not match column count");
  SampleStats s;
  s.n = static_cast<std::size_t>(data.rows());
  s.mean = data.colwise().mean().transpose();
  Matrix centered = data.rowwise() - s.mean.transpose();
  s.cov = symmetrized(centered.transpose() * centered / static_cast<double>(s.n));
  s.labels = std::move(labels);
  return s;
}

/// Stats from a covariance matrix when the raw data are not available.
inline SampleStats stats_from_covariance(const Matrix& cov, std::size_t n,
                                         std::vector<std::string> labels = {}) {
  if (cov.rows() != cov.cols()) throw InputError("covariance matrix is not square");
  if (n < 2) throw InputError("need at least two observations");
  SampleStats s;
  s.n = n;
  s.mean = Vector::Zero(cov.rows());
  s.cov = symmetrized(cov);
  if (labels.empty())
    for (Eigen::Index j = 0; j < cov.cols(); ++j) labels.push_back("X" + std::to_string(j + 1));
  s.labels = std::move(labels);
  return s;
}

/// A positive definite matrix in P(G): exact zeros at every non-edge.
class ConstrainedCovariance {
 public:
  ConstrainedCovariance(CovarianceGraph g, Matrix sigma)
      : graph_(std::move(g)), sigma_(std::move(sigma)) {
    const auto p = static_cast<Eigen::Index>(graph_.size());
    if (sigma_.rows() != p || sigma_.cols() != p)
      throw InputError("covariance matrix has wrong dimension");
    const double scale = std::max(1.0, sigma_.cwiseAbs().maxCoeff());
    if ((sigma_ - sigma_.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale)
      throw InputError("covariance matrix is not symmetric");
    sigma_ = symmetrized(sigma_);
    if (!respects_pattern(sigma_, graph_))
      throw InputError("covariance matrix violates the zero pattern of the graph");
    require_positive_definite(sigma_, "covariance matrix");
  }

  static ConstrainedCovariance identity(const CovarianceGraph& g) {
    return {g, Matrix::Identity(g.size(), g.size())};
  }

  const CovarianceGraph& graph() const { return graph_; }
  const Matrix& matrix() const { return sigma_; }
  std::size_t dimension() const { return graph_.size(); }
  double operator()(std::size_t i, std::size_t j) const { return sigma_(i, j); }

 private:
  CovarianceGraph graph_;
  Matrix sigma_;
};

/// The 0/1 map Q with vec(Sigma) = Q sigma, held as the list of vec positions
/// of each free entry (one for a variance, two for a covariance).
class DuplicationMap {
 public:
  explicit DuplicationMap(const FreeIndexSet& f) : p_(f.dimension()) {
    for (const auto& [i, j] : f) {
      if (i == j)
        columns_.push_back({{i, i}});
      else
        columns_.push_back({{i, j}, {j, i}});
    }
  }

  std::size_t rows() const { return p_ * p_; }
  std::size_t cols() const { return columns_.size(); }
  // (row, column) positions in Sigma hit by free entry k.
  const std::vector<IndexPair>& positions(std::size_t k) const { return columns_[k]; }

  // Q' vec(M).
  Vector transpose_apply(const Matrix& m) const {
    Vector out(cols());
    for (std::size_t k = 0; k < cols(); ++k) {
      double s = 0.0;
      for (const auto& [r, c] : columns_[k]) s += m(r, c);
      out(k) = s;
    }
    return out;
  }

  // Q' (A (x) B) Q, using (A (x) B)[r1 + p c1, r2 + p c2] = A(c1, c2) B(r1, r2).
  Matrix kron_sandwich(const Matrix& a, const Matrix& b) const {
    Matrix out(cols(), cols());
    for (std::size_t f = 0; f < cols(); ++f)
      for (std::size_t g = 0; g < cols(); ++g) {
        double s = 0.0;
        for (const auto& [r1, c1] : columns_[f])
          for (const auto& [r2, c2] : columns_[g]) s += a(c1, c2) * b(r1, r2);
        out(f, g) = s;
      }
    return out;
  }

  // Q sigma, reshaped as a p x p matrix.
  Matrix apply(const Vector& sigma) const {
    Matrix out = Matrix::Zero(p_, p_);
    for (std::size_t k = 0; k < cols(); ++k)
      for (const auto& [r, c] : columns_[k]) out(r, c) = sigma(k);
    return out;
  }

 private:
  std::size_t p_;
  std::vector<std::vector<IndexPair>> columns_;
};

inline Vector free_vector(const Matrix& sigma, const FreeIndexSet& f) {
  Vector out(f.size());
  for (std::size_t k = 0; k < f.size(); ++k) out(k) = sigma(f[k].first, f[k].second);
  return out;
}

inline Matrix from_free_vector(const Vector& v, const FreeIndexSet& f) {
  Matrix out = Matrix::Zero(f.dimension(), f.dimension());
  for (std::size_t k = 0; k < f.size(); ++k) {
    auto [i, j] = f[k];
    out(i, j) = out(j, i) = v(k);
  }
  return out;
}

namespace detail {
inline void check_dims(const SampleStats& stats, const Matrix& sigma) {
  if (stats.cov.rows() != sigma.rows() || sigma.rows() != sigma.cols())
    throw InputError("dimension mismatch between sample statistics and covariance");
}
}  // namespace detail

/// Profile log-likelihood -(n/2)(p log 2pi + log|Sigma| + tr(Sigma^-1 S)) for any PD Sigma.
inline double profile_loglik(const SampleStats& stats, const Matrix& sigma) {
  detail::check_dims(stats, sigma);
  require_positive_definite(sigma, "covariance matrix");
  Eigen::LLT<Matrix> llt(sigma);
  const double logdet = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  const double trace = llt.solve(stats.cov).trace();
  const double n = stats.effective_n();
  const double p = static_cast<double>(sigma.rows());
  return -0.5 * n * (p * std::log(2.0 * std::numbers::pi) + logdet + trace);
}

inline double profile_loglik(const SampleStats& stats, const ConstrainedCovariance& sigma) {
  return profile_loglik(stats, sigma.matrix());
}

/// Gradient of the profile log-likelihood with respect to the free entries.
inline Vector score(const SampleStats& stats, const ConstrainedCovariance& sigma) {
  detail::check_dims(stats, sigma.matrix());
  const Matrix k = spd_inverse(sigma.matrix());
  const Matrix w = k * stats.cov * k;
  DuplicationMap q(free_index_set(sigma.graph()));
  return 0.5 * stats.effective_n() * q.transpose_apply(w - k);
}

/// Expected information (n/2) Q'(K (x) K)Q, K = Sigma^-1, for sample size n.
inline Matrix fisher_information(const ConstrainedCovariance& sigma, double n) {
  const Matrix k = spd_inverse(sigma.matrix());
  DuplicationMap q(free_index_set(sigma.graph()));
  return 0.5 * n * q.kron_sandwich(k, k);
}

/// Observed Hessian (n/2) Q'{K(x)K - W(x)K - K(x)W}Q with W = K S K.
inline Matrix hessian(const SampleStats& stats, const ConstrainedCovariance& sigma) {
  detail::check_dims(stats, sigma.matrix());
  const Matrix k = spd_inverse(sigma.matrix());
  const Matrix w = k * stats.cov * k;
  DuplicationMap q(free_index_set(sigma.graph()));
  Matrix h = q.kron_sandwich(k, k) - q.kron_sandwich(w, k) - q.kron_sandwich(k, w);
  return 0.5 * stats.effective_n() * symmetrized(h);
}

/// max over free pairs of |(Sigma^-1)_ij - (Sigma^-1 S Sigma^-1)_ij|.
inline double stationarity_residual(const SampleStats& stats, const ConstrainedCovariance& sigma) {
  detail::check_dims(stats, sigma.matrix());
  const Matrix k = spd_inverse(sigma.matrix());
  const Matrix w = k * stats.cov * k;
  double r = 0.0;
  for (const auto& [i, j] : free_index_set(sigma.graph())) r = std::max(r, std::abs(k(i, j) - w(i, j)));
  return r;
}

/// Regression of Y_C on Y_{-C}: coefficients B_C and conditional covariance Lambda_C.
struct ConditionalParams {
  VertexSet block;     // C
  VertexSet rest;      // V \ C, column order of coefficients
  Matrix coefficients;  // |C| x |V \ C|
  Matrix lambda;        // |C| x |C|
};

inline ConditionalParams conditional_params(const Matrix& sigma, const VertexSet& c) {
  const auto p = static_cast<std::size_t>(sigma.rows());
  if (c.empty() || c.size() >= p) throw InputError("conditioning block must be a proper non-empty subset");
  for (auto v : c)
    if (v >= p) throw InputError("block vertex out of range");
  ConditionalParams out;
  out.block = c;
  out.rest = complement(p, c);
  const Matrix s_rr = sub(sigma, out.rest, out.rest);
  const Matrix s_cr = sub(sigma, c, out.rest);
  Eigen::LLT<Matrix> llt(s_rr);
  if (llt.info() != Eigen::Success) throw NumericalError("marginal covariance is not positive definite");
  out.coefficients = llt.solve(s_cr.transpose()).transpose();
  out.lambda = symmetrized(sub(sigma, c, c) - out.coefficients * s_cr.transpose());
  return out;
}

inline ConditionalParams conditional_params(const ConstrainedCovariance& sigma, const VertexSet& c) {
  return conditional_params(sigma.matrix(), c);
}

struct Deviance {
  double value = 0.0;
  std::size_t df = 0;
};

/// Deviance n[log(|Sigma|/|S|) + tr(Sigma^-1 S) - p] against the saturated model.
inline Deviance deviance(const SampleStats& stats, const ConstrainedCovariance& sigma) {
  detail::check_dims(stats, sigma.matrix());
  require_positive_definite(stats.cov, "sample covariance");
  const auto p = sigma.dimension();
  Eigen::LLT<Matrix> llt(sigma.matrix());
  const double trace = llt.solve(stats.cov).trace();
  const double value = stats.effective_n() * (log_det_spd(sigma.matrix()) - log_det_spd(stats.cov) +
                                              trace - static_cast<double>(p));
  const std::size_t df = p * (p + 1) / 2 - free_index_set(sigma.graph()).size();
  return {value, df};
}

}  // namespace covgraph
