#pragma once

#include <chrono>
#include <optional>

#include "covgraph/fit_result.hpp"
#include "covgraph/gaussian_model.hpp"

namespace covgraph {

struct AndersonSystem {
  Matrix a;  // F x F
  Vector b;  // F
};

namespace detail {

inline std::optional<Matrix> general_inverse(const Matrix& m) {
  Eigen::FullPivLU<Matrix> lu(m);
  if (!lu.isInvertible()) return std::nullopt;
  return symmetrized(lu.inverse());
}

inline AndersonSystem anderson_system_from_inverse(const Matrix& k, const Matrix& s, const FreeIndexSet& f) {
  AndersonSystem sys{Matrix(f.size(), f.size()), Vector(f.size())};
  const Matrix w = k * s * k;
  for (std::size_t r = 0; r < f.size(); ++r) {
    const auto [i, j] = f[r];
    sys.b(r) = w(i, j);
    for (std::size_t c = 0; c < f.size(); ++c) {
      const auto [kk, l] = f[c];
      sys.a(r, c) = kk == l ? k(i, kk) * k(j, kk) : k(i, kk) * k(j, l) + k(j, kk) * k(i, l);
    }
  }
  return sys;
}

inline double residual_from_inverse(const Matrix& k, const Matrix& s, const FreeIndexSet& f) {
  const Matrix w = k * s * k;
  double r = 0.0;
  for (const auto& [i, j] : f) r = std::max(r, std::abs(k(i, j) - w(i, j)));
  return r;
}

}  // namespace detail

/// Linear system A_Sigma sigma = b_Sigma whose fixed points solve the likelihood equations.
/// sigma only needs to be invertible.
inline AndersonSystem anderson_system(const Matrix& sigma, const SampleStats& stats, const FreeIndexSet& f) {
  detail::check_dims(stats, sigma);
  auto k = detail::general_inverse(sigma);
  if (!k) throw NumericalError("covariance matrix is singular");
  return detail::anderson_system_from_inverse(*k, stats.cov, f);
}

struct AndersonConfig {
  double tol = 1e-8;
  std::size_t max_iter = 1000;
  std::optional<Matrix> start;
  // Iterates whose largest entry exceeds this multiple of max|S| count as divergence.
  double blowup = 1e8;
};

/// Anderson's iteration sigma^(r+1) = A^-1 b at Sigma^(r). No safeguards:
/// iterates may leave the PD cone and the iteration may fail to converge.
inline FitResult fit_anderson(const SampleStats& stats, const CovarianceGraph& g,
                              const AndersonConfig& cfg = {}) {
  const auto t0 = std::chrono::steady_clock::now();
  detail::check_problem(stats, g);
  if (!(cfg.tol > 0.0) || cfg.max_iter < 1) throw InputError("invalid Anderson configuration");
  const FreeIndexSet f(g);
  const double scale = stats.cov.cwiseAbs().maxCoeff();

  Matrix sigma = detail::starting_value(cfg.start, g);
  FitResult res;
  res.method = Method::Anderson;
  res.graph = g;
  res.status = FitStatus::MaxIterations;
  bool done = false;
  for (std::size_t r = 1; r <= cfg.max_iter && !done; ++r) {
    auto k = detail::general_inverse(sigma);
    if (!k) {
      res.status = FitStatus::SingularSystem;
      res.message = "iterate " + std::to_string(r - 1) + " is singular";
      break;
    }
    const auto sys = detail::anderson_system_from_inverse(*k, stats.cov, f);
    Eigen::FullPivLU<Matrix> lu(sys.a);
    if (!lu.isInvertible()) {
      res.status = FitStatus::SingularSystem;
      res.message = "linear system at iterate " + std::to_string(r - 1) + " is singular";
      break;
    }
    const Vector next_free = lu.solve(sys.b);
    res.iterations = r;
    if (!next_free.allFinite() || next_free.cwiseAbs().maxCoeff() > cfg.blowup * scale) {
      res.status = FitStatus::Diverged;
      res.message = "iterates diverged";
      break;
    }
    const Matrix next = from_free_vector(next_free, f);
    const bool pd = is_positive_definite(next);
    res.pd_flags.push_back(pd);
    res.trace.push_back(pd ? profile_loglik(stats, next) : std::numeric_limits<double>::quiet_NaN());
    const double delta = max_abs_diff(next, sigma);
    sigma = next;
    if (delta < cfg.tol) {
      auto kn = detail::general_inverse(sigma);
      if (!kn) {
        res.status = FitStatus::SingularSystem;
        res.message = "fixed point is singular";
        break;
      }
      res.residual = detail::residual_from_inverse(*kn, stats.cov, f);
      if (res.residual <= 100.0 * cfg.tol) {
        res.status = pd ? FitStatus::Converged : FitStatus::ConvergedNonPD;
        if (!pd) res.message = "fixed point is not positive definite";
        done = true;
      }
    }
  }
  if (auto k = detail::general_inverse(sigma))
    res.residual = detail::residual_from_inverse(*k, stats.cov, f);
  if (res.status == FitStatus::MaxIterations) res.message = "iteration limit reached";
  res.estimate = std::move(sigma);
  if (is_positive_definite(res.estimate)) res.loglik = profile_loglik(stats, res.estimate);
  res.seconds = detail::elapsed_since(t0);
  return res;
}

}  // namespace covgraph
