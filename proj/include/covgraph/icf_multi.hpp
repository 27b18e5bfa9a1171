#pragma once

#include <chrono>

#include "covgraph/icf.hpp"

namespace covgraph {

/// The map P_C sending the free entries sigma_C of Sigma_{C,spo(C)} into the
/// full |C| x |spo(C)| block. Entries are listed in column-major (vec) order.
class BlockSelector {
 public:
  BlockSelector(const CovarianceGraph& g, const VertexSet& c, const VertexSet& sp)
      : rows_(c.size()), cols_(sp.size()) {
    for (std::size_t b = 0; b < sp.size(); ++b)
      for (std::size_t a = 0; a < c.size(); ++a)
        if (g.adjacent(c[a], sp[b])) entries_.emplace_back(a, b);
  }

  std::size_t size() const { return entries_.size(); }
  const IndexPair& operator[](std::size_t k) const { return entries_[k]; }

  // vec position of free entry k inside the |C| x |spo| block.
  std::size_t vec_position(std::size_t k) const { return entries_[k].first + rows_ * entries_[k].second; }

  Matrix expand(const Vector& sigma_c) const {
    Matrix out = Matrix::Zero(rows_, cols_);
    for (std::size_t k = 0; k < size(); ++k) out(entries_[k].first, entries_[k].second) = sigma_c(k);
    return out;
  }

  Vector gather(const Matrix& block) const {
    Vector out(size());
    for (std::size_t k = 0; k < size(); ++k) out(k) = block(entries_[k].first, entries_[k].second);
    return out;
  }

  // P' (A (x) B) P for a (spo x spo) and b (C x C).
  Matrix kron_sandwich(const Matrix& a, const Matrix& b) const {
    Matrix out(size(), size());
    for (std::size_t e = 0; e < size(); ++e)
      for (std::size_t f = 0; f < size(); ++f)
        out(e, f) = a(entries_[e].second, entries_[f].second) * b(entries_[e].first, entries_[f].first);
    return out;
  }

 private:
  std::size_t rows_, cols_;
  std::vector<IndexPair> entries_;
};

namespace detail {

// Two-step SUR update of the rows/columns in C, in place.
inline void block_update_inplace(Matrix& sigma, const Matrix& s, const CovarianceGraph& g,
                                 const VertexSet& c, bool shortcut) {
  const auto bm = block_moments(sigma, s, g, c, shortcut);
  if (bm.spouses.empty()) {
    sigma(c, c) = sub(s, c, c);
    return;
  }
  const VertexSet& sp = bm.spouses;
  const Matrix& cross = bm.moments.cross;
  const Matrix& gram = bm.moments.gram;

  // Conditional covariance under the incoming Sigma; Sigma_{C, nsp(C)} = 0.
  const Matrix sigma_csp = sub(sigma, c, sp);
  const Matrix lambda = symmetrized(sub(sigma, c, c) - sigma_csp * bm.inv_spsp * sigma_csp.transpose());
  Eigen::LLT<Matrix> lambda_llt(lambda);
  if (lambda_llt.info() != Eigen::Success)
    throw NumericalError("conditional covariance is not positive definite");
  const Matrix omega = lambda_llt.solve(Matrix::Identity(c.size(), c.size()));

  // Generalized least squares for the free entries of Sigma_{C,spo(C)}.
  BlockSelector sel(g, c, sp);
  const Matrix normal = symmetrized(sel.kron_sandwich(gram, omega));
  const Vector rhs = sel.gather(omega * cross);
  Eigen::LLT<Matrix> normal_llt(normal);
  if (normal_llt.info() != Eigen::Success)
    throw NumericalError("GLS normal matrix is not positive definite");
  const Matrix beta = sel.expand(normal_llt.solve(rhs));

  // Residual covariance at the new coefficients, then completion of Sigma_{C,C}.
  const Matrix resid = symmetrized(sub(s, c, c) - beta * cross.transpose() - cross * beta.transpose() +
                                   beta * gram * beta.transpose());
  if (!is_positive_definite(resid)) throw NumericalError("residual covariance is not positive definite");
  sigma(c, sp) = beta;
  sigma(sp, c) = beta.transpose();
  sigma(c, c) = symmetrized(resid + beta * bm.inv_spsp * beta.transpose());
}

}  // namespace detail

/// One multivariate ICF step over the complete set c.
inline ConstrainedCovariance block_update(const SampleStats& stats, const ConstrainedCovariance& sigma,
                                          const VertexSet& c) {
  const auto& g = sigma.graph();
  detail::check_dims(stats, sigma.matrix());
  if (c.empty()) throw InputError("empty block");
  for (auto v : c) check_vertex(g, v);
  if (!g.is_complete(c)) throw InputError("block is not a complete set of the graph");
  Matrix next = sigma.matrix();
  detail::block_update_inplace(next, stats.cov, g, c, true);
  return {g, std::move(next)};
}

/// Iterative Conditional Fitting with block updates over a family of complete sets.
inline FitResult fit_icf_multi(const SampleStats& stats, const CovarianceGraph& g,
                               const CompleteSetFamily& family, const IcfConfig& cfg = {}) {
  const auto t0 = std::chrono::steady_clock::now();
  if (auto v = validate_family(g, family)) throw InputError("invalid family: " + v->message);
  detail::check_problem(stats, g);
  if (!(cfg.tol > 0.0) || cfg.max_iter < 1) throw InputError("invalid ICF configuration");

  Matrix sigma = detail::starting_value(cfg.start, g);
  FitResult res;
  res.method = Method::IcfMulti;
  res.graph = g;
  for (std::size_t sweep = 1; sweep <= cfg.max_iter; ++sweep) {
    const Matrix previous = sigma;
    for (std::size_t k = 0; k < family.size(); ++k) {
      detail::block_update_inplace(sigma, stats.cov, g, family[k], cfg.component_shortcut);
      if (cfg.observer) cfg.observer(sweep, k, sigma);
    }
    res.iterations = sweep;
    if (cfg.record_trace) res.trace.push_back(profile_loglik(stats, sigma));
    if (max_abs_diff(sigma, previous) < cfg.tol) {
      res.residual = stationarity_residual(stats, {g, sigma});
      if (res.residual <= 100.0 * cfg.tol) {
        res.status = FitStatus::Converged;
        break;
      }
    }
  }
  if (res.status != FitStatus::Converged) {
    res.residual = stationarity_residual(stats, {g, sigma});
    res.message = "iteration limit reached";
  }
  res.estimate = std::move(sigma);
  res.loglik = profile_loglik(stats, res.estimate);
  res.seconds = detail::elapsed_since(t0);
  return res;
}

inline FitResult fit_icf_multi(const SampleStats& stats, const CovarianceGraph& g, const IcfConfig& cfg = {}) {
  return fit_icf_multi(stats, g, cliques(g), cfg);
}

}  // namespace covgraph
