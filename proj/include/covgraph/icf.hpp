#pragma once

#include <algorithm>
#include <chrono>
#include <numeric>
#include <random>

#include "covgraph/fit_result.hpp"
#include "covgraph/gaussian_model.hpp"
#include "covgraph/graph.hpp"

namespace covgraph {

/// Cross products of the response with the pseudo-variables and their Gram
/// matrix, both expressed through S (scaled by 1/n).
struct PseudoGram {
  Matrix cross;  // |C| x |spo(C)|: S_{C,-C} [(Sigma_{-C,-C})^-1]_{-C,spo}
  Matrix gram;   // |spo| x |spo|: [(Sigma_{-C,-C})^-1]_{spo,-C} S_{-C,-C} [..]_{-C,spo}
};

namespace detail {

// Everything a block regression needs from the fixed marginal Sigma_{-C,-C}.
struct BlockMoments {
  VertexSet spouses;   // spo(C), as vertex indices
  PseudoGram moments;
  Matrix inv_spsp;     // [(Sigma_{-C,-C})^-1]_{spo,spo}
};

inline BlockMoments block_moments(const Matrix& sigma, const Matrix& s, const CovarianceGraph& g,
                                  const VertexSet& c, bool shortcut) {
  BlockMoments out;
  out.spouses = spouses_of_set(g, c);
  if (out.spouses.empty()) return out;
  const VertexSet rest = complement(g.size(), c);
  // Sigma_{-C,-C} is block diagonal over the components of G_{-C}, so only the
  // blocks holding spouses matter.
  const VertexSet kept = shortcut ? components_touching(g, rest, out.spouses) : rest;
  std::vector<Eigen::Index> pos;
  for (auto v : out.spouses)
    pos.push_back(std::lower_bound(kept.begin(), kept.end(), v) - kept.begin());

  Eigen::LLT<Matrix> llt(sub(sigma, kept, kept));
  if (llt.info() != Eigen::Success) throw NumericalError("marginal covariance is not positive definite");
  const Matrix inv = llt.solve(Matrix::Identity(kept.size(), kept.size()));
  const Matrix w = inv(Eigen::all, pos);
  out.moments.cross = sub(s, c, kept) * w;
  out.moments.gram = symmetrized(w.transpose() * sub(s, kept, kept) * w);
  out.inv_spsp = symmetrized(inv(pos, pos));
  return out;
}

// One vertex update of univariate ICF, in place.
inline void icf_update_inplace(Matrix& sigma, const Matrix& s, const CovarianceGraph& g,
                               std::size_t i, bool shortcut) {
  const auto bm = block_moments(sigma, s, g, {i}, shortcut);
  if (bm.spouses.empty()) {
    sigma(i, i) = s(i, i);
    return;
  }
  const Matrix& gram = bm.moments.gram;
  const Eigen::RowVectorXd cross = bm.moments.cross.row(0);
  Eigen::LLT<Matrix> llt(gram);
  if (llt.info() != Eigen::Success) throw NumericalError("pseudo-variable Gram matrix is singular");
  const Eigen::RowVectorXd beta = llt.solve(cross.transpose()).transpose();
  const double lambda = s(i, i) - 2.0 * beta.dot(cross) + (beta * gram * beta.transpose())(0, 0);
  if (!(lambda > 0.0)) throw NumericalError("non-positive residual variance in vertex update");
  for (std::size_t k = 0; k < bm.spouses.size(); ++k) {
    sigma(i, bm.spouses[k]) = beta(k);
    sigma(bm.spouses[k], i) = beta(k);
  }
  sigma(i, i) = lambda + (beta * bm.inv_spsp * beta.transpose())(0, 0);
}

}  // namespace detail

/// Pseudo-variable moments for vertex i given the fixed (V\{i}) x (V\{i})
/// block `sigma_rest`. Computed without the component shortcut.
inline PseudoGram pseudo_variables_gram(const SampleStats& stats, const Matrix& sigma_rest,
                                        const CovarianceGraph& g, std::size_t i) {
  check_vertex(g, i);
  const auto p = g.size();
  if (sigma_rest.rows() != static_cast<Eigen::Index>(p - 1) || sigma_rest.cols() != sigma_rest.rows())
    throw InputError("marginal block has wrong dimension");
  const VertexSet sp = spouses(g, i);
  if (sp.empty()) throw InputError("vertex '" + g.label(i) + "' has no spouses");
  const VertexSet rest = complement(p, {i});
  std::vector<Eigen::Index> pos;
  for (auto v : sp) pos.push_back(std::lower_bound(rest.begin(), rest.end(), v) - rest.begin());
  Eigen::LLT<Matrix> llt(sigma_rest);
  if (llt.info() != Eigen::Success) throw NumericalError("marginal covariance is singular");
  const Matrix inv = llt.solve(Matrix::Identity(p - 1, p - 1));
  const Matrix w = inv(Eigen::all, pos);
  PseudoGram out;
  out.cross = sub(stats.cov, {i}, rest) * w;
  out.gram = symmetrized(w.transpose() * sub(stats.cov, rest, rest) * w);
  return out;
}

/// Maximizes the likelihood over the section that fixes Sigma_{-i,-i}:
/// least-squares regression of Y_i on its pseudo-variables, then completion
/// of sigma_ii from the residual variance.
inline ConstrainedCovariance icf_update_vertex(const SampleStats& stats,
                                               const ConstrainedCovariance& sigma, std::size_t i) {
  check_vertex(sigma.graph(), i);
  detail::check_dims(stats, sigma.matrix());
  Matrix next = sigma.matrix();
  detail::icf_update_inplace(next, stats.cov, sigma.graph(), i, true);
  return {sigma.graph(), std::move(next)};
}

/// Iterative Conditional Fitting with univariate updates.
inline FitResult fit_icf(const SampleStats& stats, const CovarianceGraph& g, const IcfConfig& cfg = {}) {
  const auto t0 = std::chrono::steady_clock::now();
  detail::check_problem(stats, g);
  if (!(cfg.tol > 0.0) || cfg.max_iter < 1) throw InputError("invalid ICF configuration");
  std::vector<std::size_t> order = cfg.order;
  if (order.empty()) {
    order.resize(g.size());
    std::iota(order.begin(), order.end(), 0);
  } else {
    auto sorted = order;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t k = 0; k < sorted.size(); ++k)
      if (sorted[k] != k || sorted.size() != g.size())
        throw InputError("sweep order is not a permutation of the vertices");
  }

  Matrix sigma = detail::starting_value(cfg.start, g);
  FitResult res;
  res.method = Method::Icf;
  res.graph = g;
  for (std::size_t sweep = 1; sweep <= cfg.max_iter; ++sweep) {
    const Matrix previous = sigma;
    for (std::size_t step = 0; step < order.size(); ++step) {
      detail::icf_update_inplace(sigma, stats.cov, g, order[step], cfg.component_shortcut);
      if (cfg.observer) cfg.observer(sweep, step, sigma);
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

/// Random positive definite starting value in P(G) (diagonally dominant).
template <class Rng>
Matrix random_start(const CovarianceGraph& g, Rng& rng) {
  std::uniform_real_distribution<double> off(-1.0, 1.0), extra(0.5, 1.5);
  const auto p = g.size();
  Matrix m = Matrix::Zero(p, p);
  for (const auto& [i, j] : g.edges()) m(i, j) = m(j, i) = off(rng);
  for (std::size_t i = 0; i < p; ++i) m(i, i) = m.row(i).cwiseAbs().sum() + extra(rng);
  return m;
}

/// Runs ICF from each start and returns the fit with the largest likelihood.
/// An empty list means the identity start only.
inline FitResult fit_icf_multistart(const SampleStats& stats, const CovarianceGraph& g,
                                    IcfConfig cfg, const std::vector<Matrix>& starts) {
  if (starts.empty()) return fit_icf(stats, g, cfg);
  std::optional<FitResult> best;
  for (const auto& s : starts) {
    cfg.start = s;
    auto r = fit_icf(stats, g, cfg);
    if (!best || (r.converged() && !best->converged()) ||
        (r.converged() == best->converged() && r.loglik > best->loglik))
      best = std::move(r);
  }
  return *best;
}

}  // namespace covgraph
