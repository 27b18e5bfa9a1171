#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <iomanip>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "covgraph/anderson.hpp"
#include "covgraph/dual_fit.hpp"
#include "covgraph/empirical_likelihood.hpp"
#include "covgraph/icf.hpp"
#include "covgraph/icf_multi.hpp"

namespace covgraph {

/// Four variables with edges 1<->3, 3<->4, 2<->4.
inline CovarianceGraph four_variable_graph() {
  return CovarianceGraph(CovarianceGraph::numbered(4), std::vector<std::pair<std::string, std::string>>{
                                                           {"1", "3"}, {"3", "4"}, {"2", "4"}});
}

/// Covariance matrix in P(four_variable_graph()) used by the simulation defaults.
inline Matrix four_variable_sigma() {
  Matrix s(4, 4);
  s << 1.0, 0.0, 0.5, 0.0,
       0.0, 1.0, 0.0, 0.25,
       0.5, 0.0, 1.0, 0.75,
       0.0, 0.25, 0.75, 1.0;
  return s;
}

/// splitmix64 finalizer; used to derive independent substream seeds.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Engine for substream (seed, stream, index); identical inputs give identical draws.
inline std::mt19937_64 substream(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
  const std::uint64_t s = mix64(mix64(mix64(seed) ^ stream) ^ index);
  std::seed_seq seq{static_cast<std::uint32_t>(s), static_cast<std::uint32_t>(s >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(index)};
  return std::mt19937_64(seq);
}

/// n i.i.d. rows from N(0, sigma).
template <class Rng>
Matrix sample_gaussian(const Matrix& sigma, std::size_t n, Rng& rng) {
  require_positive_definite(sigma, "sampling covariance");
  Eigen::LLT<Matrix> llt(sigma);
  const Matrix l = llt.matrixL();
  std::normal_distribution<double> norm(0.0, 1.0);
  Matrix z(n, sigma.rows());
  for (std::size_t k = 0; k < n; ++k)
    for (Eigen::Index j = 0; j < sigma.cols(); ++j) z(k, j) = norm(rng);
  return z * l.transpose();
}

/// n i.i.d. rows from the multivariate t with dispersion sigma and df degrees
/// of freedom: z / sqrt(u / df), z ~ N(0, sigma), u ~ chi^2(df).
template <class Rng>
Matrix sample_t(const Matrix& sigma, double df, std::size_t n, Rng& rng) {
  if (!(df > 0.0)) throw InputError("degrees of freedom must be positive");
  require_positive_definite(sigma, "dispersion matrix");
  Eigen::LLT<Matrix> llt(sigma);
  const Matrix l = llt.matrixL();
  std::normal_distribution<double> norm(0.0, 1.0);
  std::chi_squared_distribution<double> chi(df);
  Matrix out(n, sigma.rows());
  Vector z(sigma.rows());
  for (std::size_t k = 0; k < n; ++k) {
    for (Eigen::Index j = 0; j < sigma.cols(); ++j) z(j) = norm(rng);
    const double u = chi(rng);
    out.row(k) = (l * z).transpose() / std::sqrt(u / df);
  }
  return out;
}

enum class Distribution { Gaussian, StudentT };

struct SimSpec {
  Matrix sigma = four_variable_sigma();
  CovarianceGraph graph = four_variable_graph();
  Distribution distribution = Distribution::Gaussian;
  double df = 5.0;
  std::vector<std::size_t> sample_sizes{100};
  std::size_t replications = 200;
  std::uint64_t seed = 1;
  std::vector<Method> methods{Method::Icf, Method::Dual, Method::EmpiricalLikelihood};
  unsigned threads = 1;
  IcfConfig icf;
  ElConfig el;

  /// Covariance of the sampling distribution: sigma, or df/(df-2) sigma for t.
  Matrix truth() const {
    if (distribution == Distribution::Gaussian) return sigma;
    return df / (df - 2.0) * sigma;
  }
};

struct SimEntry {
  std::string method;
  std::size_t n = 0;
  std::size_t i = 0, j = 0;  // i <= j
  double bias = 0.0;
  double rmse = 0.0;
  double bias_se = 0.0;  // Monte-Carlo standard error of bias
  double rmse_se = 0.0;  // delta-method standard error of rmse
  std::size_t failures = 0;
  std::size_t successes = 0;
};

struct SimReport {
  SimSpec spec;
  std::vector<SimEntry> entries;

  const SimEntry& find(const std::string& method, std::size_t n, std::size_t i, std::size_t j) const {
    if (i > j) std::swap(i, j);
    for (const auto& e : entries)
      if (e.method == method && e.n == n && e.i == i && e.j == j) return e;
    throw InputError("no report entry for " + method);
  }
};

/// A fitter returns the estimate for one simulated data set, or nothing on failure.
using SimFitter = std::function<std::optional<Matrix>(const Matrix& data, const SampleStats& stats,
                                                      const CovarianceGraph& g)>;
struct NamedFitter {
  std::string name;
  SimFitter fit;
};

inline NamedFitter make_fitter(Method m, const IcfConfig& icf, const ElConfig& el) {
  auto ml_ok = [](const FitResult& r) -> std::optional<Matrix> {
    if (!r.converged() || !is_positive_definite(r.estimate) || !respects_pattern(r.estimate, r.graph))
      return std::nullopt;
    return r.estimate;
  };
  switch (m) {
    case Method::Icf:
      return {"ml-icf", [=](const Matrix&, const SampleStats& s, const CovarianceGraph& g) {
                return ml_ok(fit_icf(s, g, icf));
              }};
    case Method::IcfMulti:
      return {"ml-icf-multi", [=](const Matrix&, const SampleStats& s, const CovarianceGraph& g) {
                return ml_ok(fit_icf_multi(s, g, icf));
              }};
    case Method::Anderson:
      return {"ml-anderson", [=](const Matrix&, const SampleStats& s, const CovarianceGraph& g) {
                AndersonConfig ac;
                ac.tol = icf.tol;
                return ml_ok(fit_anderson(s, g, ac));
              }};
    case Method::Dual:
      return {"dual", [=](const Matrix&, const SampleStats& s, const CovarianceGraph& g) {
                return ml_ok(fit_dual(s, g));
              }};
    case Method::EmpiricalLikelihood:
      return {"el", [=](const Matrix& data, const SampleStats&, const CovarianceGraph& g) -> std::optional<Matrix> {
                auto r = fit_el(data, g, el);
                if (r.status != ElStatus::Ok) return std::nullopt;
                return r.sigma;
              }};
  }
  throw InputError("unknown method");
}

/// Monte-Carlo bias and RMSE of each fitter for every free entry (i <= j).
/// Replication r at sample size n always sees the same data, whatever the
/// thread count, so reports are reproducible bit for bit.
inline SimReport run_simulation(const SimSpec& spec, const std::vector<NamedFitter>& fitters) {
  if (spec.replications < 1) throw InputError("replications must be at least 1");
  if (spec.sample_sizes.empty()) throw InputError("no sample sizes given");
  if (spec.distribution == Distribution::StudentT && !(spec.df > 4.0))
    throw InputError("t degrees of freedom must exceed 4 for RMSE of covariances");
  if (static_cast<std::size_t>(spec.sigma.rows()) != spec.graph.size())
    throw InputError("sigma and graph dimensions differ");
  require_positive_definite(spec.sigma, "simulation covariance");
  if (!respects_pattern(spec.sigma, spec.graph)) throw InputError("sigma violates the graph's zero pattern");

  const Matrix truth = spec.truth();
  const FreeIndexSet f(spec.graph);
  const std::size_t reps = spec.replications;
  SimReport report;
  report.spec = spec;

  for (std::size_t n : spec.sample_sizes) {
    if (n < 2) throw InputError("sample sizes must be at least 2");
    // errors[method][rep] holds the free-entry errors, or nothing on failure.
    std::vector<std::vector<std::optional<Vector>>> errors(fitters.size(),
                                                           std::vector<std::optional<Vector>>(reps));
    auto work = [&](std::size_t first, std::size_t stride) {
      for (std::size_t r = first; r < reps; r += stride) {
        auto rng = substream(spec.seed, n, r);
        const Matrix data = spec.distribution == Distribution::Gaussian
                                ? sample_gaussian(spec.sigma, n, rng)
                                : sample_t(spec.sigma, spec.df, n, rng);
        const SampleStats stats = sample_stats(data, spec.graph.labels());
        for (std::size_t m = 0; m < fitters.size(); ++m) {
          std::optional<Matrix> est;
          try {
            est = fitters[m].fit(data, stats, spec.graph);
          } catch (const Error&) {
            est.reset();
          }
          if (est && est->allFinite()) errors[m][r] = free_vector(*est - truth, f);
        }
      }
    };
    const unsigned threads = std::max(1u, spec.threads);
    if (threads == 1) {
      work(0, 1);
    } else {
      std::vector<std::thread> pool;
      for (unsigned t = 0; t < threads; ++t) pool.emplace_back(work, t, threads);
      for (auto& th : pool) th.join();
    }

    for (std::size_t m = 0; m < fitters.size(); ++m) {
      std::size_t ok = 0;
      Vector sum = Vector::Zero(f.size()), sum_sq = Vector::Zero(f.size()), sum_4 = Vector::Zero(f.size());
      for (std::size_t r = 0; r < reps; ++r) {
        if (!errors[m][r]) continue;
        ++ok;
        const Vector& e = *errors[m][r];
        sum += e;
        sum_sq += e.cwiseProduct(e);
        sum_4 += e.cwiseProduct(e).cwiseProduct(e.cwiseProduct(e));
      }
      for (std::size_t k = 0; k < f.size(); ++k) {
        SimEntry en;
        en.method = fitters[m].name;
        en.n = n;
        en.i = f[k].first;
        en.j = f[k].second;
        en.failures = reps - ok;
        en.successes = ok;
        if (ok > 0) {
          const double cnt = static_cast<double>(ok);
          const double mean = sum(k) / cnt;
          const double mse = sum_sq(k) / cnt;
          en.bias = mean;
          en.rmse = std::sqrt(mse);
          if (ok > 1) {
            const double var_e = std::max(0.0, (sum_sq(k) - cnt * mean * mean) / (cnt - 1.0));
            const double var_sq = std::max(0.0, (sum_4(k) - cnt * mse * mse) / (cnt - 1.0));
            en.bias_se = std::sqrt(var_e / cnt);
            en.rmse_se = en.rmse > 0.0 ? std::sqrt(var_sq / cnt) / (2.0 * en.rmse) : 0.0;
          }
        }
        report.entries.push_back(en);
      }
    }
  }
  return report;
}

inline SimReport run_simulation(const SimSpec& spec) {
  std::vector<NamedFitter> fitters;
  for (auto m : spec.methods) fitters.push_back(make_fitter(m, spec.icf, spec.el));
  return run_simulation(spec, fitters);
}

/// Delimited report: '#' metadata lines (including the truth matrix), then
/// method,n,i,j,bias,rmse,failures,bias_se,rmse_se.
inline void write_report(std::ostream& os, const SimReport& rep) {
  const auto& spec = rep.spec;
  const auto& labels = spec.graph.labels();
  std::ostringstream out;
  out << std::setprecision(17);
  out << "# distribution "
      << (spec.distribution == Distribution::Gaussian ? "gaussian" : "t") << '\n';
  if (spec.distribution == Distribution::StudentT) out << "# df " << spec.df << '\n';
  out << "# seed " << spec.seed << '\n';
  out << "# replications " << spec.replications << '\n';
  out << "# truth";
  for (const auto& l : labels) out << ' ' << l;
  out << '\n';
  const Matrix truth = spec.truth();
  for (Eigen::Index i = 0; i < truth.rows(); ++i) {
    out << "# " << labels[i];
    for (Eigen::Index j = 0; j < truth.cols(); ++j) out << ' ' << truth(i, j);
    out << '\n';
  }
  out << "method,n,i,j,bias,rmse,failures,bias_se,rmse_se\n";
  for (const auto& e : rep.entries)
    out << e.method << ',' << e.n << ',' << labels[e.i] << ',' << labels[e.j] << ',' << e.bias << ','
        << e.rmse << ',' << e.failures << ',' << e.bias_se << ',' << e.rmse_se << '\n';
  os << out.str();
}

}  // namespace covgraph
