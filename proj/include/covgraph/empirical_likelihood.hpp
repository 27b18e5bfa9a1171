#pragma once

#include <chrono>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "covgraph/fit_result.hpp"
#include "covgraph/gaussian_model.hpp"
#include "covgraph/simplex.hpp"

namespace covgraph {

/// Observation weights and the profiled mean of an empirical likelihood fit.
struct WeightedSample {
  Vector weights;      // n
  Vector mean;         // p
  Vector multipliers;  // one per constraint: p mean constraints, then one per missing edge
  double log_ratio = 0.0;  // sum_k log(n w_k), <= 0
};

enum class ElStatus { Ok, Infeasible, NotConverged };

inline std::string_view el_status_name(ElStatus s) {
  switch (s) {
    case ElStatus::Ok: return "ok";
    case ElStatus::Infeasible: return "infeasible";
    case ElStatus::NotConverged: return "not-converged";
  }
  return "unknown";
}

struct ElConfig {
  // Inner dual: stop when max_r |sum_k w_k g_kr| falls below this times max|g|.
  double inner_tol = 1e-13;
  std::size_t inner_max_iter = 200;
  // Outer search over the mean: stop when the gradient max-norm is below this.
  double outer_tol = 1e-9;
  std::size_t outer_max_iter = 500;
};

struct InnerElResult {
  ElStatus status = ElStatus::Infeasible;
  WeightedSample sample;
  std::size_t iterations = 0;
  std::string message;
};

/// Per-observation constraint values g_k(mu): p centred values followed by the
/// products of centred values for each missing edge. Row k is observation k.
inline Matrix el_constraints(const Matrix& data, const Vector& mu, const CovarianceGraph& g) {
  const Matrix centered = data.rowwise() - mu.transpose();
  const auto missing = g.missing_edges();
  Matrix out(data.rows(), data.cols() + static_cast<Eigen::Index>(missing.size()));
  out.leftCols(data.cols()) = centered;
  for (std::size_t e = 0; e < missing.size(); ++e) {
    const auto [i, j] = missing[e];
    out.col(data.cols() + e) = centered.col(i).cwiseProduct(centered.col(j));
  }
  return out;
}

namespace detail {

// True iff 0 is in the interior of the convex hull of the rows of gm:
// columns of full rank and max t subject to sum_k w_k g_k = 0, sum w = 1,
// w_k >= t has a positive optimum.
inline bool origin_interior_to_hull(const Matrix& gm) {
  const auto n = gm.rows(), m = gm.cols();
  Eigen::ColPivHouseholderQR<Matrix> qr(gm);
  qr.setThreshold(1e-10);
  if (qr.rank() < m) return false;
  // Variables v_k = w_k - t >= 0 and t >= 0.
  Matrix a = Matrix::Zero(m + 1, n + 1);
  a.topLeftCorner(m, n) = gm.transpose();
  a.topRightCorner(m, 1) = gm.colwise().sum().transpose();
  a.block(m, 0, 1, n).setOnes();
  a(m, n) = static_cast<double>(n);
  Vector b = Vector::Zero(m + 1);
  b(m) = 1.0;
  // Rescale constraint rows so the tolerance in the simplex is meaningful.
  for (Eigen::Index r = 0; r < m; ++r) {
    const double s = a.row(r).cwiseAbs().maxCoeff();
    if (s > 0) a.row(r) /= s;
  }
  Vector c = Vector::Zero(n + 1);
  c(n) = -1.0;
  const auto res = lp::minimize(a, b, c);
  if (res.status != lp::LpStatus::Optimal) return false;
  return -res.value > 1e-9 / static_cast<double>(n);
}

// Owen's pseudo-logarithm: log(z) for z >= eps, quadratic continuation below.
struct PseudoLog {
  double eps;
  double value(double z) const {
    if (z >= eps) return std::log(z);
    const double r = z / eps;
    return std::log(eps) - 1.5 + 2.0 * r - 0.5 * r * r;
  }
  double d1(double z) const { return z >= eps ? 1.0 / z : (2.0 - z / eps) / eps; }
  double d2(double z) const { return z >= eps ? -1.0 / (z * z) : -1.0 / (eps * eps); }
};

// Minimizes -sum_k log*(1 + lambda'g_k) by damped Newton.
inline InnerElResult solve_el_dual(const Matrix& gm, const ElConfig& cfg) {
  const auto n = gm.rows(), m = gm.cols();
  const PseudoLog plog{1.0 / static_cast<double>(n)};
  const double gscale = std::max(1.0, gm.cwiseAbs().maxCoeff());
  auto objective = [&](const Vector& lam) {
    const Vector z = Vector::Ones(n) + gm * lam;
    double f = 0.0;
    for (Eigen::Index k = 0; k < n; ++k) f -= plog.value(z(k));
    return f;
  };

  InnerElResult res;
  Vector lambda = Vector::Zero(m);
  double f = objective(lambda);
  bool converged = false;
  for (std::size_t it = 1; it <= cfg.inner_max_iter; ++it) {
    res.iterations = it;
    const Vector z = Vector::Ones(n) + gm * lambda;
    Vector grad = Vector::Zero(m);
    Matrix hess = Matrix::Zero(m, m);
    Vector weights(n);
    for (Eigen::Index k = 0; k < n; ++k) {
      grad -= plog.d1(z(k)) * gm.row(k).transpose();
      weights(k) = -plog.d2(z(k));
    }
    hess = gm.transpose() * weights.asDiagonal() * gm;
    if (grad.cwiseAbs().maxCoeff() <= cfg.inner_tol * gscale * static_cast<double>(n)) {
      converged = true;
      break;
    }
    Eigen::LDLT<Matrix> ldlt(hess);
    Vector step = -ldlt.solve(grad);
    if (!step.allFinite()) break;
    // Predicted decrease below the resolution of f: line search cannot help, take the Newton step.
    if (-grad.dot(step) < 1e-12 * (1.0 + std::abs(f))) {
      lambda += step;
      f = objective(lambda);
      continue;
    }
    double t = 1.0;
    bool moved = false;
    for (int ls = 0; ls < 60; ++ls) {
      const Vector trial = lambda + t * step;
      const double ft = objective(trial);
      if (ft <= f + 1e-4 * t * grad.dot(step)) {
        lambda = trial;
        f = ft;
        moved = true;
        break;
      }
      t *= 0.5;
    }
    if (!moved) {
      // No further decrease at machine precision: accept if stationary enough.
      converged = grad.cwiseAbs().maxCoeff() <= 1e-8 * gscale * static_cast<double>(n);
      break;
    }
  }

  const Vector z = Vector::Ones(n) + gm * lambda;
  if (z.minCoeff() <= 0.0) {
    res.status = ElStatus::NotConverged;
    res.message = "dual solution leaves the domain of the logarithm";
    return res;
  }
  res.sample.multipliers = lambda;
  res.sample.weights = (z * static_cast<double>(n)).cwiseInverse();
  res.sample.log_ratio = -z.array().log().sum();
  res.status = converged ? ElStatus::Ok : ElStatus::NotConverged;
  if (!converged) res.message = "dual Newton iteration did not converge";
  return res;
}

}  // namespace detail

/// Inner maximization over the weights for a fixed mean, solved in the
/// Lagrange dual: w_k = 1 / (n (1 + lambda'g_k)).
inline InnerElResult inner_el(const Matrix& data, const Vector& mu, const CovarianceGraph& g,
                              const ElConfig& cfg = {}) {
  if (data.cols() != static_cast<Eigen::Index>(g.size()) || mu.size() != data.cols())
    throw InputError("dimension mismatch in empirical likelihood problem");
  if (!data.allFinite() || !mu.allFinite()) throw InputError("non-finite data");
  InnerElResult res;
  const auto n = static_cast<std::size_t>(data.rows());
  const std::size_t cov_constraints = g.missing_edges().size();
  if (n <= 1 + cov_constraints) {
    res.message = "sample size must exceed the number of constraints plus one";
    return res;
  }
  const Matrix gm = el_constraints(data, mu, g);
  if (!detail::origin_interior_to_hull(gm)) {
    res.message = "zero is not interior to the convex hull of the constraint values";
    return res;
  }
  res = detail::solve_el_dual(gm, cfg);
  res.sample.mean = mu;
  return res;
}

struct ElFit {
  ElStatus status = ElStatus::Infeasible;
  WeightedSample sample;
  Matrix sigma;          // weighted covariance about the fitted mean
  bool singular = false;  // sigma is only positive semi-definite
  std::size_t outer_iterations = 0;
  double seconds = 0.0;
  std::string message;
};

/// Weighted covariance sum_k w_k (y_k - mu)(y_k - mu)'.
inline Matrix weighted_covariance(const Matrix& data, const WeightedSample& ws) {
  const Matrix centered = data.rowwise() - ws.mean.transpose();
  return symmetrized(centered.transpose() * ws.weights.asDiagonal() * centered);
}

/// Empirical likelihood estimate of (mu, Sigma) under the zero covariances of g.
///
/// The mean is profiled by BFGS started at the sample mean. By the envelope
/// theorem the gradient of the profile in mu is n times the multipliers of the
/// mean constraints.
inline ElFit fit_el(const Matrix& data, const CovarianceGraph& g, const ElConfig& cfg = {}) {
  const auto t0 = std::chrono::steady_clock::now();
  if (data.rows() < 2) throw InputError("need at least two observations");
  const auto p = data.cols();
  const double n = static_cast<double>(data.rows());
  ElFit fit;

  auto evaluate = [&](const Vector& mu) { return inner_el(data, mu, g, cfg); };

  // Starting point: the sample mean, then the coordinatewise median, then a
  // box of shifts around the mean.
  const Vector ybar = data.colwise().mean().transpose();
  std::vector<Vector> probes{ybar};
  {
    Vector med(p);
    for (Eigen::Index j = 0; j < p; ++j) {
      std::vector<double> col(data.col(j).data(), data.col(j).data() + data.rows());
      std::nth_element(col.begin(), col.begin() + col.size() / 2, col.end());
      med(j) = col[col.size() / 2];
    }
    probes.push_back(med);
    const Vector sd = ((data.rowwise() - ybar.transpose()).colwise().squaredNorm() / n).cwiseSqrt();
    for (Eigen::Index j = 0; j < p; ++j)
      for (double s : {-0.25, 0.25}) {
        Vector mu = ybar;
        mu(j) += s * sd(j);
        probes.push_back(mu);
      }
  }
  InnerElResult cur;
  Vector mu;
  bool found = false;
  for (const auto& probe : probes) {
    cur = evaluate(probe);
    if (cur.status == ElStatus::Ok) {
      mu = probe;
      found = true;
      break;
    }
  }
  if (!found) {
    fit.status = ElStatus::Infeasible;
    fit.message = "no feasible starting value for the mean: " + cur.message;
    fit.seconds = detail::elapsed_since(t0);
    return fit;
  }

  // Minimize -log_ratio over mu.
  auto gradient = [&](const InnerElResult& r) -> Vector { return -n * r.sample.multipliers.head(p); };
  Vector grad = gradient(cur);
  Matrix hinv = Matrix::Identity(p, p);
  {
    const double sc = grad.cwiseAbs().maxCoeff();
    if (sc > 0) hinv /= std::max(1.0, sc);
  }
  bool converged = grad.cwiseAbs().maxCoeff() <= cfg.outer_tol;
  std::size_t it = 0;
  while (!converged && it < cfg.outer_max_iter) {
    ++it;
    Vector dir = -hinv * grad;
    if (grad.dot(dir) >= 0) {
      hinv.setIdentity();
      dir = -grad;
    }
    double t = 1.0;
    bool moved = false;
    InnerElResult next;
    for (int ls = 0; ls < 60; ++ls) {
      next = evaluate(mu + t * dir);
      if (next.status == ElStatus::Ok &&
          -next.sample.log_ratio <= -cur.sample.log_ratio + 1e-4 * t * grad.dot(dir)) {
        moved = true;
        break;
      }
      t *= 0.5;
    }
    if (!moved) break;
    const Vector s = t * dir;
    const Vector ng = gradient(next);
    const Vector y = ng - grad;
    mu += s;
    cur = std::move(next);
    grad = ng;
    const double sy = s.dot(y);
    if (sy > 1e-300) {
      const Matrix eye = Matrix::Identity(p, p);
      const double rho = 1.0 / sy;
      hinv = (eye - rho * s * y.transpose()) * hinv * (eye - rho * y * s.transpose()) + rho * s * s.transpose();
    }
    converged = grad.cwiseAbs().maxCoeff() <= cfg.outer_tol;
  }
  // A stalled line search at a point whose gradient is tiny relative to the
  // data scale is still an optimum to working precision.
  if (!converged) {
    const double dscale = std::max(1.0, data.cwiseAbs().maxCoeff());
    converged = grad.cwiseAbs().maxCoeff() <= 1e-6 * dscale;
  }

  fit.sample = cur.sample;
  fit.outer_iterations = it;
  fit.sigma = weighted_covariance(data, fit.sample);
  apply_pattern(fit.sigma, g);  // the constraints hold to rounding; make the zeros exact
  fit.singular = !is_positive_definite(fit.sigma);
  fit.status = converged ? ElStatus::Ok : ElStatus::NotConverged;
  if (!converged) fit.message = "outer search over the mean did not converge";
  fit.seconds = detail::elapsed_since(t0);
  return fit;
}

/// Packs an empirical likelihood fit as a FitResult; the log-likelihood is the
/// Gaussian profile likelihood of the estimate (NaN if it is singular).
inline FitResult to_fit_result(const ElFit& el, const CovarianceGraph& g, const SampleStats& stats) {
  FitResult res;
  res.method = Method::EmpiricalLikelihood;
  res.graph = g;
  res.estimate = el.sigma;
  res.iterations = el.outer_iterations;
  switch (el.status) {
    case ElStatus::Ok: res.status = el.singular ? FitStatus::ConvergedNonPD : FitStatus::Converged; break;
    case ElStatus::Infeasible: res.status = FitStatus::Infeasible; break;
    case ElStatus::NotConverged: res.status = FitStatus::MaxIterations; break;
  }
  res.message = el.message;
  res.seconds = el.seconds;
  if (el.status == ElStatus::Ok && !el.singular) res.loglik = profile_loglik(stats, el.sigma);
  return res;
}

}  // namespace covgraph
