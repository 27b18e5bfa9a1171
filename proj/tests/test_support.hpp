#pragma once

#include <random>
#include <string>

#include "covgraph/covgraph.hpp"

namespace covgraph::testing {

inline std::string data_path(const std::string& name) { return std::string(COVGRAPH_DATA_DIR) + "/" + name; }

inline CovarianceGraph four_graph() { return four_variable_graph(); }

inline CovarianceGraph graph_of(std::size_t p, const std::vector<std::pair<std::string, std::string>>& edges) {
  return CovarianceGraph(CovarianceGraph::numbered(p), edges);
}

// Wishart-like random PD matrix: A'A / m + small ridge.
inline Matrix random_spd(std::size_t p, std::mt19937_64& rng, std::size_t m = 0) {
  if (m == 0) m = p + 4;
  std::normal_distribution<double> z(0.0, 1.0);
  Matrix a(m, p);
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j) a(i, j) = z(rng);
  return symmetrized(a.transpose() * a / static_cast<double>(m) + 0.05 * Matrix::Identity(p, p));
}

// Random PD member of P(G).
inline Matrix random_patterned(const CovarianceGraph& g, std::mt19937_64& rng) {
  for (;;) {
    Matrix m = random_spd(g.size(), rng);
    apply_pattern(m, g);
    if (is_positive_definite(m)) return m;
  }
}

inline SampleStats random_stats(std::size_t p, std::mt19937_64& rng, std::size_t n = 100) {
  return stats_from_covariance(random_spd(p, rng), n);
}

// Numerical gradient by central differences.
template <class F>
Vector numeric_gradient(F&& f, const Vector& x, double h) {
  Vector g(x.size());
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    Vector a = x, b = x;
    a(k) += h;
    b(k) -= h;
    g(k) = (f(a) - f(b)) / (2.0 * h);
  }
  return g;
}

inline double rel_err(const Vector& a, const Vector& b) {
  return (a - b).cwiseAbs().maxCoeff() / std::max(1.0, b.cwiseAbs().maxCoeff());
}

}  // namespace covgraph::testing
