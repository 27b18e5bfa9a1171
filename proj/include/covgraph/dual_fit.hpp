#pragma once

#include <chrono>

#include "covgraph/fit_result.hpp"
#include "covgraph/gaussian_model.hpp"

namespace covgraph {

struct DualConfig {
  double tol = 1e-10;
  std::size_t max_iter = 10000;
  // Clique order for IPF; cliques(g) when empty.
  CompleteSetFamily clique_order;
  // Skip the closed form for decomposable graphs and always iterate.
  bool force_ipf = false;
};

/// max over free pairs of |(Sigma^-1)_ij - (S^-1)_ij|.
inline double dual_residual(const Matrix& sigma, const Matrix& s_inv, const FreeIndexSet& f) {
  const Matrix k = spd_inverse(sigma);
  double r = 0.0;
  for (const auto& [i, j] : f) r = std::max(r, std::abs(k(i, j) - s_inv(i, j)));
  return r;
}

/// Dual estimate: the unique Sigma in P(G) with (Sigma^-1)_ij = (S^-1)_ij on
/// the free pairs.
///
/// Equivalent to fitting a concentration graph model on G to the "sample
/// covariance" S^-1; the fitted concentration matrix of that problem is the
/// dual estimate. Decomposable graphs use the closed form over a perfect
/// sequence of cliques; otherwise IPF over the cliques, stopping on the
/// dual-equation residual.
inline FitResult fit_dual(const SampleStats& stats, const CovarianceGraph& g, const DualConfig& cfg = {}) {
  const auto t0 = std::chrono::steady_clock::now();
  detail::check_problem(stats, g);
  if (!(cfg.tol > 0.0) || cfg.max_iter < 1) throw InputError("invalid dual configuration");
  const FreeIndexSet f(g);
  const Matrix target = spd_inverse(stats.cov);
  const auto p = g.size();

  FitResult res;
  res.method = Method::Dual;
  res.graph = g;

  Matrix conc = Matrix::Identity(p, p);
  bool have = false;
  if (!cfg.force_ipf && cfg.clique_order.empty() && is_decomposable(g)) {
    const auto seq = perfect_sequence(g);
    conc.setZero();
    for (std::size_t k = 0; k < seq.cliques.size(); ++k) {
      const auto& c = seq.cliques[k];
      conc(c, c) += spd_inverse(sub(target, c, c));
      const auto& sep = seq.separators[k];
      if (!sep.empty()) conc(sep, sep) -= spd_inverse(sub(target, sep, sep));
    }
    conc = symmetrized(conc);
    res.iterations = 1;
    if (is_positive_definite(conc)) {
      res.residual = dual_residual(conc, target, f);
      have = res.residual <= cfg.tol;
    }
    if (!have) conc = Matrix::Identity(p, p);
  }

  if (!have) {
    const CompleteSetFamily order = cfg.clique_order.empty() ? cliques(g) : cfg.clique_order;
    if (auto v = validate_family(g, order)) throw InputError("invalid clique order: " + v->message);
    res.iterations = 0;
    for (std::size_t it = 1; it <= cfg.max_iter; ++it) {
      for (const auto& c : order) {
        // Match the C-marginal of conc^-1 to that of the target.
        const Matrix fitted = spd_inverse(conc);
        conc(c, c) += spd_inverse(sub(target, c, c)) - spd_inverse(sub(fitted, c, c));
        conc = symmetrized(conc);
      }
      res.iterations = it;
      res.residual = dual_residual(conc, target, f);
      if (res.residual <= cfg.tol) {
        have = true;
        break;
      }
    }
  }

  res.status = have ? FitStatus::Converged : FitStatus::MaxIterations;
  if (!have) res.message = "iteration limit reached";
  res.estimate = std::move(conc);
  res.loglik = profile_loglik(stats, res.estimate);
  res.seconds = detail::elapsed_since(t0);
  return res;
}

}  // namespace covgraph
