// covgraph: fit covariance graph models from the command line.
//
// Exit codes: 0 converged, 2 not converged, 1 input or numerical error.

#include <unistd.h>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "covgraph/covgraph.hpp"

using namespace covgraph;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 1;
constexpr int kExitNotConverged = 2;

bool env_set(const char* name) {
  const char* v = std::getenv(name);
  return v != nullptr && *v != '\0' && std::string(v) != "0";
}

struct Console {
  bool quiet = env_set("COVGRAPH_QUIET");
  bool color = !env_set("NO_COLOR") && !env_set("COVGRAPH_QUIET") && isatty(fileno(stderr));

  void info(const std::string& msg) const {
    if (!quiet) std::cerr << msg << '\n';
  }
  void warn(const std::string& msg) const {
    if (quiet) return;
    std::cerr << (color ? "\033[33mwarning:\033[0m " : "warning: ") << msg << '\n';
  }
  void error(const std::string& msg) const {
    std::cerr << (color ? "\033[31merror:\033[0m " : "error: ") << msg << '\n';
  }
};

struct InputOptions {
  std::string graph, data, stats, start, family;
  char delimiter = ',';
  bool no_header = false;
  bool n_adjust = false;
};

struct Problem {
  CovarianceGraph graph;
  SampleStats stats;
  std::optional<Matrix> data;  // aligned to the graph's vertex order
};

Problem load_problem(const InputOptions& in) {
  Problem pr;
  pr.graph = io::read_graph_file(in.graph);
  if (in.data.empty() == in.stats.empty()) throw InputError("give exactly one of --data and --stats");
  if (!in.data.empty()) {
    auto table = io::align_to_graph(io::read_data_file(in.data, {in.delimiter, !in.no_header}), pr.graph);
    pr.stats = sample_stats(table.values, table.labels);
    pr.data = std::move(table.values);
  } else {
    pr.stats = io::align_to_graph(io::read_stats_file(in.stats), pr.graph);
  }
  pr.stats.adjust_n = in.n_adjust;
  return pr;
}

Matrix aligned_matrix(const std::string& path, const CovarianceGraph& g) {
  auto m = io::read_matrix_file(path);
  SampleStats tmp = stats_from_covariance(m.values, 2, m.labels);
  return io::align_to_graph(tmp, g).cov;
}

struct FitOptions {
  std::string method = "ml-icf";
  double tol = 0.0;  // 0: method default
  std::size_t max_iter = 0;
};

FitResult run_fit(Method m, const Problem& pr, const FitOptions& fo, const InputOptions& in) {
  std::optional<Matrix> start;
  if (!in.start.empty()) start = aligned_matrix(in.start, pr.graph);
  switch (m) {
    case Method::Icf:
    case Method::IcfMulti: {
      IcfConfig cfg;
      if (fo.tol > 0) cfg.tol = fo.tol;
      if (fo.max_iter > 0) cfg.max_iter = fo.max_iter;
      cfg.start = start;
      cfg.record_trace = true;
      if (m == Method::Icf) return fit_icf(pr.stats, pr.graph, cfg);
      const auto fam = in.family.empty() ? cliques(pr.graph) : io::read_family_file(in.family, pr.graph);
      return fit_icf_multi(pr.stats, pr.graph, fam, cfg);
    }
    case Method::Anderson: {
      AndersonConfig cfg;
      if (fo.tol > 0) cfg.tol = fo.tol;
      if (fo.max_iter > 0) cfg.max_iter = fo.max_iter;
      cfg.start = start;
      return fit_anderson(pr.stats, pr.graph, cfg);
    }
    case Method::Dual: {
      DualConfig cfg;
      if (fo.tol > 0) cfg.tol = fo.tol;
      if (fo.max_iter > 0) cfg.max_iter = fo.max_iter;
      return fit_dual(pr.stats, pr.graph, cfg);
    }
    case Method::EmpiricalLikelihood: {
      if (!pr.data) throw InputError("method 'el' needs raw observations (--data); summary statistics are not enough");
      ElConfig cfg;
      if (fo.tol > 0) cfg.outer_tol = fo.tol;
      if (fo.max_iter > 0) cfg.outer_max_iter = fo.max_iter;
      return to_fit_result(fit_el(*pr.data, pr.graph, cfg), pr.graph, pr.stats);
    }
  }
  throw InputError("unknown method");
}

std::string fmt(double v, int digits = -1) {
  std::ostringstream os;
  if (digits < 0)
    os << std::setprecision(17) << v;
  else
    os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

// Correlations off the diagonal, standard deviations on it.
Matrix correlation_form(const Matrix& sigma) {
  const Vector sd = sigma.diagonal().cwiseSqrt();
  Matrix out = sigma;
  for (Eigen::Index i = 0; i < sigma.rows(); ++i)
    for (Eigen::Index j = 0; j < sigma.cols(); ++j) out(i, j) = i == j ? sd(i) : sigma(i, j) / (sd(i) * sd(j));
  return out;
}

void write_fit_header(std::ostream& os, const FitResult& r, const Problem& pr, int digits) {
  os << "# method " << method_name(r.method) << '\n';
  os << "# status " << status_name(r.status) << '\n';
  os << "# iterations " << r.iterations << '\n';
  os << "# seconds " << fmt(r.seconds, 6) << '\n';
  os << "# n " << pr.stats.n << (pr.stats.adjust_n ? " (likelihood uses n-1)" : "") << '\n';
  os << "# loglik " << fmt(r.loglik, digits) << '\n';
  const bool ml = is_likelihood_method(r.method);
  const char* dev_label = ml ? "deviance" : "deviance-functional";
  if (is_positive_definite(r.estimate) && respects_pattern(r.estimate, pr.graph)) {
    const auto d = deviance(pr.stats, {pr.graph, r.estimate});
    os << "# " << dev_label << ' ' << fmt(d.value, digits) << " df " << d.df << '\n';
  } else {
    os << "# " << dev_label << " nan\n";
  }
  if (!std::isnan(r.residual)) os << "# residual " << fmt(r.residual, -1) << '\n';
  if (!r.message.empty()) os << "# message " << r.message << '\n';
}

void write_trace(const std::string& path, const FitResult& r) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write trace file '" + path + "'");
  out << std::setprecision(17);
  const bool flags = !r.pd_flags.empty();
  out << (flags ? "iteration,loglik,pd\n" : "iteration,loglik\n");
  for (std::size_t k = 0; k < r.trace.size(); ++k) {
    out << k + 1 << ',' << r.trace[k];
    if (flags) out << ',' << (r.pd_flags[k] ? 1 : 0);
    out << '\n';
  }
}

int exit_for(const FitResult& r) { return r.converged() ? kExitOk : kExitNotConverged; }

void add_input_options(CLI::App* cmd, InputOptions& in, bool need_graph = true) {
  cmd->add_option("--graph", in.graph, "Graph file (vertex/edge declarations)")->required(need_graph)->check(CLI::ExistingFile);
  cmd->add_option("--data", in.data, "Delimited data file, one observation per row")->check(CLI::ExistingFile);
  cmd->add_option("--stats", in.stats, "Summary statistics file (n, sd, correlations)")->check(CLI::ExistingFile);
  cmd->add_option("--delimiter", in.delimiter, "Field delimiter of --data");
  cmd->add_flag("--no-header", in.no_header, "--data has no header row");
  cmd->add_flag("--n-adjust", in.n_adjust, "Use n-1 in place of n in the likelihood");
}

void add_fit_options(CLI::App* cmd, FitOptions& fo) {
  cmd->add_option("--tol", fo.tol, "Convergence tolerance")->check(CLI::PositiveNumber);
  cmd->add_option("--max-iter", fo.max_iter, "Iteration cap")->check(CLI::PositiveNumber);
}

int cmd_fit(const InputOptions& in, const FitOptions& fo, const std::vector<std::string>& compare,
            const std::string& trace, const std::string& out_path, int digits, bool correlations,
            const Console& con) {
  const auto pr = load_problem(in);
  if (!pr.stats.positive_definite()) throw NumericalError("sample covariance matrix is not positive definite");
  const Method m = parse_method(fo.method);
  const auto res = run_fit(m, pr, fo, in);
  con.info(std::string(method_name(m)) + ": " + std::string(status_name(res.status)) + " after " +
           std::to_string(res.iterations) + " iterations in " + fmt(res.seconds, 4) + " s");

  std::ostringstream os;
  write_fit_header(os, res, pr, digits);
  for (const auto& other : compare) {
    const Method om = parse_method(other);
    const auto r2 = run_fit(om, pr, fo, in);
    os << "# compare " << method_name(om) << " status " << status_name(r2.status) << " loglik "
       << fmt(r2.loglik, digits) << " loglik-difference " << fmt(res.loglik - r2.loglik, digits)
       << " max-abs-difference " << fmt(max_abs_diff(res.estimate, r2.estimate), digits) << '\n';
  }
  io::write_matrix(os, correlations ? correlation_form(res.estimate) : res.estimate, pr.graph.labels(), digits);
  if (out_path.empty()) {
    std::cout << os.str();
  } else {
    std::ofstream f(out_path);
    if (!f) throw InputError("cannot write '" + out_path + "'");
    f << os.str();
  }
  if (!trace.empty()) write_trace(trace, res);
  if (!res.converged()) con.warn(res.message.empty() ? "fit did not converge" : res.message);
  return exit_for(res);
}

int cmd_loglik(const InputOptions& in, const std::string& sigma_path, int digits) {
  const auto pr = load_problem(in);
  const Matrix sigma = aligned_matrix(sigma_path, pr.graph);
  const ConstrainedCovariance c(pr.graph, sigma);
  const auto d = deviance(pr.stats, c);
  std::cout << "loglik," << fmt(profile_loglik(pr.stats, c), digits) << '\n'
            << "deviance," << fmt(d.value, digits) << '\n'
            << "df," << d.df << '\n'
            << "stationarity_residual," << fmt(stationarity_residual(pr.stats, c), digits) << '\n';
  return kExitOk;
}

int cmd_compare(const InputOptions& in, const FitOptions& fo, const std::vector<std::string>& methods, int digits,
                const Console& con) {
  const auto pr = load_problem(in);
  std::vector<FitResult> fits;
  for (const auto& name : methods) {
    const Method m = parse_method(name);
    if (m == Method::EmpiricalLikelihood && !pr.data) {
      con.warn("skipping 'el': needs --data");
      continue;
    }
    fits.push_back(run_fit(m, pr, fo, in));
  }
  std::cout << "method,status,iterations,seconds,loglik,deviance,df\n";
  bool all_ok = true;
  for (const auto& r : fits) {
    all_ok = all_ok && r.converged();
    std::string dev = "nan", df = "";
    if (is_positive_definite(r.estimate)) {
      const auto d = deviance(pr.stats, {pr.graph, r.estimate});
      dev = fmt(d.value, digits);
      df = std::to_string(d.df);
    }
    std::cout << method_name(r.method) << ',' << status_name(r.status) << ',' << r.iterations << ','
              << fmt(r.seconds, 6) << ',' << fmt(r.loglik, digits) << ',' << dev << ',' << df << '\n';
  }
  std::cout << "\nfirst,second,loglik_difference,max_abs_difference\n";
  for (std::size_t a = 0; a < fits.size(); ++a)
    for (std::size_t b = a + 1; b < fits.size(); ++b)
      std::cout << method_name(fits[a].method) << ',' << method_name(fits[b].method) << ','
                << fmt(fits[a].loglik - fits[b].loglik, digits) << ','
                << fmt(max_abs_diff(fits[a].estimate, fits[b].estimate), digits) << '\n';
  return all_ok ? kExitOk : kExitNotConverged;
}

struct SimOptions {
  std::string graph, sigma, dist = "gaussian", out;
  double df = 5.0;
  std::vector<std::size_t> sizes{100};
  std::size_t reps = 200;
  std::uint64_t seed = 1;
  std::vector<std::string> methods{"ml-icf", "dual", "el"};
  unsigned threads = 1;
};

int cmd_simulate(const SimOptions& so, const FitOptions& fo, const Console& con) {
  SimSpec spec;
  if (!so.graph.empty()) {
    spec.graph = io::read_graph_file(so.graph);
    if (so.sigma.empty()) throw InputError("--graph needs --sigma for simulation");
  }
  if (!so.sigma.empty()) spec.sigma = aligned_matrix(so.sigma, spec.graph);
  if (so.dist == "gaussian") {
    spec.distribution = Distribution::Gaussian;
  } else if (so.dist == "t") {
    spec.distribution = Distribution::StudentT;
    spec.df = so.df;
  } else {
    throw InputError("unknown distribution '" + so.dist + "' (gaussian or t)");
  }
  spec.sample_sizes = so.sizes;
  spec.replications = so.reps;
  spec.seed = so.seed;
  spec.threads = so.threads;
  spec.methods.clear();
  for (const auto& m : so.methods) spec.methods.push_back(parse_method(m));
  if (fo.tol > 0) spec.icf.tol = fo.tol;
  if (fo.max_iter > 0) spec.icf.max_iter = fo.max_iter;

  const auto rep = run_simulation(spec);
  std::ostringstream os;
  write_report(os, rep);
  if (so.out.empty()) {
    std::cout << os.str();
  } else {
    std::ofstream f(so.out);
    if (!f) throw InputError("cannot write '" + so.out + "'");
    f << os.str();
  }
  for (const auto& e : rep.entries)
    if (e.i == 0 && e.j == 0 && e.failures > 0)
      con.info(e.method + " at n=" + std::to_string(e.n) + ": " + std::to_string(e.failures) + " of " +
               std::to_string(so.reps) + " replications failed");
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  const Console con;
  CLI::App app{"Estimation of covariance matrices with prescribed zeros"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "covgraph 0.1.0");

  InputOptions in;
  FitOptions fo;
  int digits = -1;
  std::string trace, out_path, sigma_path;
  std::vector<std::string> compare;
  bool correlations = false;

  auto* fit = app.add_subcommand("fit", "Fit a covariance graph model");
  add_input_options(fit, in);
  add_fit_options(fit, fo);
  fit->add_option("--method", fo.method, "ml-icf, ml-icf-multi, ml-anderson, dual or el");
  fit->add_option("--family", in.family, "Complete-set family for ml-icf-multi (default: cliques)")
      ->check(CLI::ExistingFile);
  fit->add_option("--start", in.start, "Starting covariance matrix")->check(CLI::ExistingFile);
  fit->add_option("--trace", trace, "Write per-iteration log-likelihoods to this file");
  fit->add_option("--digits", digits, "Fixed decimals in the output (default: 17 significant digits)");
  fit->add_option("--compare", compare, "Also fit these methods and report log-likelihood differences")
      ->delimiter(',');
  fit->add_option("--out", out_path, "Write the estimate here instead of stdout");
  fit->add_flag("--correlations", correlations, "Print correlations with standard deviations on the diagonal");

  auto* loglik = app.add_subcommand("loglik", "Evaluate the likelihood at a given covariance matrix");
  add_input_options(loglik, in);
  loglik->add_option("--sigma", sigma_path, "Covariance matrix file")->required()->check(CLI::ExistingFile);
  loglik->add_option("--digits", digits, "Fixed decimals in the output");

  std::vector<std::string> methods{"ml-icf", "ml-icf-multi", "ml-anderson", "dual"};
  auto* cmp = app.add_subcommand("compare", "Fit several methods and compare them");
  add_input_options(cmp, in);
  add_fit_options(cmp, fo);
  cmp->add_option("--methods", methods, "Comma-separated methods")->delimiter(',');
  cmp->add_option("--family", in.family, "Complete-set family for ml-icf-multi")->check(CLI::ExistingFile);
  cmp->add_option("--start", in.start, "Starting covariance matrix")->check(CLI::ExistingFile);
  cmp->add_option("--digits", digits, "Fixed decimals in the output");

  SimOptions so;
  auto* sim = app.add_subcommand("simulate", "Monte-Carlo bias and RMSE of the estimators");
  sim->add_option("--graph", so.graph, "Graph file (default: the four-variable example)")->check(CLI::ExistingFile);
  sim->add_option("--sigma", so.sigma, "True covariance matrix file")->check(CLI::ExistingFile);
  sim->add_option("--dist", so.dist, "gaussian or t");
  sim->add_option("--df", so.df, "Degrees of freedom of the t distribution");
  sim->add_option("--n", so.sizes, "Sample sizes")->delimiter(',');
  sim->add_option("--reps", so.reps, "Replications per sample size")->check(CLI::PositiveNumber);
  sim->add_option("--seed", so.seed, "Random seed");
  sim->add_option("--methods", so.methods, "Comma-separated methods")->delimiter(',');
  sim->add_option("--threads", so.threads, "Worker threads")->check(CLI::PositiveNumber);
  sim->add_option("--out", so.out, "Write the report here instead of stdout");
  add_fit_options(sim, fo);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    con.error(e.what());
    return kExitInput;
  }

  try {
    if (fit->parsed()) return cmd_fit(in, fo, compare, trace, out_path, digits, correlations, con);
    if (loglik->parsed()) return cmd_loglik(in, sigma_path, digits);
    if (cmp->parsed()) return cmd_compare(in, fo, methods, digits, con);
    if (sim->parsed()) return cmd_simulate(so, fo, con);
  } catch (const std::exception& e) {
    con.error(e.what());
    return kExitInput;
  }
  return kExitInput;
}
