#pragma once

// Independent reference solvers used only by the tests: a derivative-free
// maximizer (GSL Nelder-Mead with restarts), a generic root finder (GSL
// hybrid method) and a primal Newton solver for the empirical likelihood
// weights.

#include <gsl/gsl_errno.h>
#include <gsl/gsl_multimin.h>
#include <gsl/gsl_multiroots.h>

#include <cmath>
#include <functional>
#include <limits>

#include "covgraph/covgraph.hpp"

namespace covgraph::oracle {

using Objective = std::function<double(const Vector&)>;

namespace detail {

inline double nm_trampoline(const gsl_vector* v, void* params) {
  const auto& f = *static_cast<const Objective*>(params);
  Vector x(v->size);
  for (std::size_t k = 0; k < v->size; ++k) x(k) = gsl_vector_get(v, k);
  const double val = f(x);
  return std::isfinite(val) ? val : std::numeric_limits<double>::max();
}

inline int root_trampoline(const gsl_vector* v, void* params, gsl_vector* out) {
  const auto& f = *static_cast<const std::function<Vector(const Vector&)>*>(params);
  Vector x(v->size);
  for (std::size_t k = 0; k < v->size; ++k) x(k) = gsl_vector_get(v, k);
  const Vector r = f(x);
  for (std::size_t k = 0; k < v->size; ++k) gsl_vector_set(out, k, r(k));
  return r.allFinite() ? GSL_SUCCESS : GSL_EDOM;
}

}  // namespace detail

/// Minimizes f by repeated Nelder-Mead runs, each restarted from the previous
/// optimum with a fresh simplex, until a restart no longer improves.
inline Vector minimize(const Objective& f, Vector x, double step = 0.1, int restarts = 40) {
  const std::size_t d = x.size();
  gsl_multimin_function fn{&detail::nm_trampoline, d, const_cast<Objective*>(&f)};
  gsl_vector* xv = gsl_vector_alloc(d);
  gsl_vector* ss = gsl_vector_alloc(d);
  gsl_multimin_fminimizer* s = gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2, d);
  double best = f(x);
  for (int r = 0; r < restarts; ++r) {
    for (std::size_t k = 0; k < d; ++k) gsl_vector_set(xv, k, x(k));
    gsl_vector_set_all(ss, step);
    gsl_multimin_fminimizer_set(s, &fn, xv, ss);
    for (int it = 0; it < 20000; ++it) {
      if (gsl_multimin_fminimizer_iterate(s) != GSL_SUCCESS) break;
      if (gsl_multimin_test_size(gsl_multimin_fminimizer_size(s), 1e-11) == GSL_SUCCESS) break;
    }
    const double val = s->fval;
    for (std::size_t k = 0; k < d; ++k) x(k) = gsl_vector_get(s->x, k);
    const bool improved = val < best - 1e-12 * std::max(1.0, std::abs(best));
    best = std::min(best, val);
    step = std::max(1e-4, step * 0.5);
    if (!improved && r > 2) break;
  }
  gsl_multimin_fminimizer_free(s);
  gsl_vector_free(ss);
  gsl_vector_free(xv);
  return x;
}

/// Maximizes the profile log-likelihood over the free entries of Sigma,
/// assigning -inf outside the PD cone.
inline Matrix brute_force_ml(const SampleStats& st, const CovarianceGraph& g) {
  const FreeIndexSet f(g);
  Objective neg = [&](const Vector& x) {
    const Matrix sigma = from_free_vector(x, f);
    if (!is_positive_definite(sigma)) return std::numeric_limits<double>::infinity();
    return -profile_loglik(st, sigma);
  };
  Matrix start = st.cov;
  apply_pattern(start, g);
  if (!is_positive_definite(start)) start = st.cov.diagonal().asDiagonal();
  return from_free_vector(minimize(neg, free_vector(start, f)), f);
}

/// Solves r(x) = 0 by the GSL hybrid method.
inline std::optional<Vector> find_root(const std::function<Vector(const Vector&)>& r, Vector x) {
  const std::size_t d = x.size();
  gsl_multiroot_function fn{&detail::root_trampoline, d, const_cast<std::function<Vector(const Vector&)>*>(&r)};
  gsl_vector* xv = gsl_vector_alloc(d);
  for (std::size_t k = 0; k < d; ++k) gsl_vector_set(xv, k, x(k));
  gsl_multiroot_fsolver* s = gsl_multiroot_fsolver_alloc(gsl_multiroot_fsolver_hybrids, d);
  gsl_multiroot_fsolver_set(s, &fn, xv);
  bool ok = false;
  for (int it = 0; it < 1000; ++it) {
    if (gsl_multiroot_fsolver_iterate(s) != GSL_SUCCESS) break;
    if (gsl_multiroot_test_residual(s->f, 1e-13) == GSL_SUCCESS) {
      ok = true;
      break;
    }
  }
  for (std::size_t k = 0; k < d; ++k) x(k) = gsl_vector_get(s->x, k);
  gsl_multiroot_fsolver_free(s);
  gsl_vector_free(xv);
  if (!ok) return std::nullopt;
  return x;
}

/// Primal empirical likelihood: max sum log w subject to G'w = 0, sum w = 1,
/// by infeasible-start Newton on the equality-constrained problem.
/// Returns sum_k log(n w_k), or NaN if the iteration fails.
inline double el_primal_log_ratio(const Matrix& gm) {
  const auto n = gm.rows(), m = gm.cols();
  Matrix a(m + 1, n);
  a.topRows(m) = gm.transpose();
  a.row(m).setOnes();
  Vector b = Vector::Zero(m + 1);
  b(m) = 1.0;
  Vector w = Vector::Constant(n, 1.0 / static_cast<double>(n));
  Vector nu = Vector::Zero(m + 1);
  auto residual = [&](const Vector& ww, const Vector& vv) {
    Vector r(n + m + 1);
    r.head(n) = -ww.cwiseInverse() + a.transpose() * vv;
    r.tail(m + 1) = a * ww - b;
    return r;
  };
  for (int it = 0; it < 200; ++it) {
    const Vector r = residual(w, nu);
    if (r.norm() < 1e-13) break;
    Matrix kkt = Matrix::Zero(n + m + 1, n + m + 1);
    kkt.topLeftCorner(n, n) = w.array().square().inverse().matrix().asDiagonal();
    kkt.topRightCorner(n, m + 1) = a.transpose();
    kkt.bottomLeftCorner(m + 1, n) = a;
    const Vector step = kkt.fullPivLu().solve(-r);
    const Vector dw = step.head(n), dnu = step.tail(m + 1);
    double t = 1.0;
    while ((w + t * dw).minCoeff() <= 0.0) t *= 0.5;
    while (t > 1e-16 && residual(w + t * dw, nu + t * dnu).norm() > (1.0 - 0.01 * t) * r.norm()) t *= 0.5;
    w += t * dw;
    nu += t * dnu;
  }
  if ((a * w - b).cwiseAbs().maxCoeff() > 1e-10) return std::numeric_limits<double>::quiet_NaN();
  return (w * static_cast<double>(n)).array().log().sum();
}

}  // namespace covgraph::oracle
