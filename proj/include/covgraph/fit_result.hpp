#pragma once

#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "covgraph/gaussian_model.hpp"

namespace covgraph {

enum class Method { Icf, IcfMulti, Anderson, Dual, EmpiricalLikelihood };

inline std::string_view method_name(Method m) {
  switch (m) {
    case Method::Icf: return "ml-icf";
    case Method::IcfMulti: return "ml-icf-multi";
    case Method::Anderson: return "ml-anderson";
    case Method::Dual: return "dual";
    case Method::EmpiricalLikelihood: return "el";
  }
  return "unknown";
}

inline Method parse_method(std::string_view name) {
  for (auto m : {Method::Icf, Method::IcfMulti, Method::Anderson, Method::Dual,
                 Method::EmpiricalLikelihood})
    if (method_name(m) == name) return m;
  throw InputError("unknown method '" + std::string(name) + "'");
}

inline bool is_likelihood_method(Method m) {
  return m == Method::Icf || m == Method::IcfMulti || m == Method::Anderson;
}

enum class FitStatus {
  Converged,          // converged to a PD matrix
  ConvergedNonPD,     // fixed point reached but not positive definite (Anderson)
  MaxIterations,      // iteration cap reached
  Diverged,           // non-finite iterate (Anderson)
  SingularSystem,     // singular linear system (Anderson)
  Infeasible,         // no admissible solution exists (empirical likelihood)
};

inline std::string_view status_name(FitStatus s) {
  switch (s) {
    case FitStatus::Converged: return "converged";
    case FitStatus::ConvergedNonPD: return "converged-non-pd";
    case FitStatus::MaxIterations: return "max-iterations";
    case FitStatus::Diverged: return "diverged";
    case FitStatus::SingularSystem: return "singular-system";
    case FitStatus::Infeasible: return "infeasible";
  }
  return "unknown";
}

struct FitResult {
  Method method = Method::Icf;
  CovarianceGraph graph;
  Matrix estimate;
  // NaN when the estimate is not positive definite.
  double loglik = std::numeric_limits<double>::quiet_NaN();
  std::size_t iterations = 0;
  FitStatus status = FitStatus::MaxIterations;
  // Per-iteration log-likelihood (NaN entries for non-PD iterates).
  std::vector<double> trace;
  // Per-iteration positive-definiteness (Anderson only).
  std::vector<bool> pd_flags;
  // Likelihood-equation residual for ML methods, dual-equation residual for dual.
  double residual = std::numeric_limits<double>::quiet_NaN();
  double seconds = 0.0;
  std::string message;

  bool converged() const { return status == FitStatus::Converged; }
  ConstrainedCovariance constrained() const { return {graph, estimate}; }
};

/// Called after every vertex/block update with (sweep, step, current Sigma).
using UpdateObserver = std::function<void(std::size_t, std::size_t, const Matrix&)>;

struct IcfConfig {
  double tol = 1e-8;
  std::size_t max_iter = 5000;
  std::optional<Matrix> start;  // identity when empty
  bool record_trace = false;
  // Vertex sweep order (univariate ICF); natural order when empty.
  std::vector<std::size_t> order;
  // Invert only the components of G_{-C} that contain spouses of C.
  bool component_shortcut = true;
  UpdateObserver observer;
};

namespace detail {

inline double elapsed_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

inline void check_problem(const SampleStats& stats, const CovarianceGraph& g) {
  if (stats.dimension() != g.size())
    throw InputError("sample statistics have " + std::to_string(stats.dimension()) +
                     " variables but the graph has " + std::to_string(g.size()) + " vertices");
  if (!stats.positive_definite())
    throw NumericalError("sample covariance matrix is singular; refusing to fit");
}

inline Matrix starting_value(const std::optional<Matrix>& start, const CovarianceGraph& g) {
  if (!start) return Matrix::Identity(g.size(), g.size());
  return ConstrainedCovariance(g, *start).matrix();
}

}  // namespace detail

}  // namespace covgraph
