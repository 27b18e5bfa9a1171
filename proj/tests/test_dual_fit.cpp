#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "test_support.hpp"

using namespace covgraph;
using namespace covgraph::testing;

TEST(FitDual, CompleteGraphGivesS) {
  std::mt19937_64 rng(1);
  const auto st = random_stats(4, rng);
  const auto res = fit_dual(st, CovarianceGraph::complete(CovarianceGraph::numbered(4)));
  ASSERT_TRUE(res.converged());
  EXPECT_LT(max_abs_diff(res.estimate, st.cov), 1e-12);
}

TEST(FitDual, TwoVariablesWithoutEdge) {
  const double r = 0.6;
  Matrix s(2, 2);
  s << 1.0, r, r, 1.0;
  const auto st = stats_from_covariance(s, 10);
  const auto g = CovarianceGraph(CovarianceGraph::numbered(2));
  const auto res = fit_dual(st, g);
  ASSERT_TRUE(res.converged());
  EXPECT_LT(max_abs_diff(res.estimate, (1 - r * r) * Matrix::Identity(2, 2)), 1e-12);
  // ML gives diag(S) = I instead.
  EXPECT_LT(max_abs_diff(fit_icf(st, g).estimate, Matrix::Identity(2, 2)), 1e-12);
}

TEST(FitDual, ChainMatchesGenericRootFinder) {
  std::mt19937_64 rng(2);
  const auto g = graph_of(3, {{"1", "2"}, {"2", "3"}});
  ASSERT_TRUE(is_decomposable(g));
  const FreeIndexSet f(g);
  for (int rep = 0; rep < 5; ++rep) {
    const auto st = random_stats(3, rng, 30);
    const Matrix target = st.cov.inverse();
    DualConfig cfg;
    const auto res = fit_dual(st, g, cfg);
    ASSERT_TRUE(res.converged());
    EXPECT_EQ(res.iterations, 1u);  // closed form, no iteration
    auto eqs = [&](const Vector& x) {
      const Matrix k = from_free_vector(x, f).inverse();
      Vector r(f.size());
      for (std::size_t c = 0; c < f.size(); ++c) r(c) = k(f[c].first, f[c].second) - target(f[c].first, f[c].second);
      return r;
    };
    Matrix start = st.cov;
    apply_pattern(start, g);
    const auto root = oracle::find_root(eqs, free_vector(start, f));
    ASSERT_TRUE(root.has_value());
    EXPECT_LT(max_abs_diff(from_free_vector(*root, f), res.estimate), 1e-8);

    // A single IPF pass in perfect order also lands on the solution.
    cfg.clique_order = perfect_sequence(g).cliques;
    cfg.max_iter = 1;
    cfg.tol = 1e-9;
    const auto ipf = fit_dual(st, g, cfg);
    EXPECT_TRUE(ipf.converged());
    EXPECT_LT(max_abs_diff(ipf.estimate, res.estimate), 1e-9);
  }
}

TEST(FitDual, CliqueOrderDoesNotMatter) {
  std::mt19937_64 rng(3);
  // Four-cycle plus a chord-free tail: not decomposable, so IPF iterates.
  const auto g = graph_of(5, {{"1", "2"}, {"2", "3"}, {"3", "4"}, {"4", "1"}, {"4", "5"}});
  ASSERT_FALSE(is_decomposable(g));
  for (int rep = 0; rep < 5; ++rep) {
    const auto st = random_stats(5, rng, 40);
    auto order = cliques(g);
    DualConfig a, b;
    a.clique_order = order;
    std::reverse(order.begin(), order.end());
    b.clique_order = order;
    const auto ra = fit_dual(st, g, a), rb = fit_dual(st, g, b);
    ASSERT_TRUE(ra.converged() && rb.converged());
    EXPECT_LT(max_abs_diff(ra.estimate, rb.estimate), 1e-8);
    EXPECT_LE(ra.residual, a.tol);
    EXPECT_TRUE(respects_pattern(ra.estimate, g));
    EXPECT_TRUE(is_positive_definite(ra.estimate));
  }
}

TEST(FitDual, ClosedFormAgreesWithForcedIpf) {
  std::mt19937_64 rng(4);
  for (int rep = 0; rep < 10; ++rep) {
    const auto st = random_stats(4, rng, 30);
    DualConfig forced;
    forced.force_ipf = true;
    const auto a = fit_dual(st, four_graph()), b = fit_dual(st, four_graph(), forced);
    ASSERT_TRUE(a.converged() && b.converged());
    EXPECT_LT(max_abs_diff(a.estimate, b.estimate), 1e-9);
    EXPECT_LT(dual_residual(a.estimate, st.cov.inverse(), FreeIndexSet(four_graph())), 1e-8);
  }
}

TEST(FitDual, YeastAgreementIsBetterForDenseGraph) {
  const auto st = io::read_stats_file(data_path("yeast_gal.stats"));
  auto corr = [](const Matrix& m) {
    const Vector d = m.diagonal().cwiseSqrt().cwiseInverse();
    return Matrix(d.asDiagonal() * m * d.asDiagonal());
  };
  double gap[2];
  int k = 0;
  for (const char* name : {"yeast_dense.graph", "yeast_sparse.graph"}) {
    const auto g = io::read_graph_file(data_path(name));
    const auto aligned = io::align_to_graph(st, g);
    gap[k++] = max_abs_diff(corr(fit_icf(aligned, g).estimate), corr(fit_dual(aligned, g).estimate));
  }
  EXPECT_LT(gap[0], gap[1]);
}

TEST(FitDual, RefusesSingularS) {
  EXPECT_THROW(fit_dual(stats_from_covariance(Matrix::Ones(4, 4), 10), four_graph()), NumericalError);
}
