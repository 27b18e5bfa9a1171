#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "test_support.hpp"

using namespace covgraph;
using namespace covgraph::testing;

namespace {

template <class F>
std::string error_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST(ReadGraph, ParsesDeclarationsAndComments) {
  std::istringstream in("# four variables\nvertex a\nvertex b  # trailing\n\nvertex c\nedge a c\nedge c b\n");
  const auto g = io::read_graph(in);
  EXPECT_EQ(g.labels(), (std::vector<std::string>{"a", "b", "c"}));
  EXPECT_EQ(g.num_edges(), 2u);
  EXPECT_TRUE(g.adjacent(1, 2));
}

TEST(ReadGraph, ErrorsCiteLines) {
  std::istringstream dup("vertex a\nvertex b\nedge a b\nedge b a\n");
  EXPECT_NE(error_of([&] { io::read_graph(dup, "g.txt"); }).find("duplicate"), std::string::npos);
  std::istringstream late("vertex a\nvertex b\nedge a b\nvertex c\n");
  EXPECT_NE(error_of([&] { io::read_graph(late, "g.txt"); }).find("g.txt:4"), std::string::npos);
  std::istringstream junk("vertex a\nnode b\n");
  EXPECT_NE(error_of([&] { io::read_graph(junk, "g.txt"); }).find("g.txt:2"), std::string::npos);
  std::istringstream unknown("vertex a\nedge a z\n");
  const auto msg = error_of([&] { io::read_graph(unknown, "g.txt"); });
  EXPECT_NE(msg.find("'z'"), std::string::npos);
  EXPECT_NE(msg.find("g.txt:2"), std::string::npos);
}

TEST(ReadGraph, RoundTrip) {
  std::ostringstream out;
  io::write_graph(out, four_graph());
  std::istringstream in(out.str());
  const auto g = io::read_graph(in);
  EXPECT_EQ(g.labels(), four_graph().labels());
  EXPECT_EQ(g.edges(), four_graph().edges());
}

TEST(ReadGraph, ShippedYeastGraphs) {
  const auto gd = io::read_graph_file(data_path("yeast_dense.graph"));
  const auto gs = io::read_graph_file(data_path("yeast_sparse.graph"));
  EXPECT_EQ(gd.size(), 8u);
  EXPECT_EQ(gd.num_edges(), 19u);
  EXPECT_EQ(gs.num_edges(), 15u);
  for (const auto& [i, j] : gs.edges()) EXPECT_TRUE(gd.adjacent(i, j));
  EXPECT_THROW(io::read_graph_file(data_path("missing.graph")), InputError);
}

TEST(ReadFamily, CommaSeparatedSets) {
  std::istringstream in("1,3\n 3 , 4\n# comment\n2,4\n");
  const auto fam = io::read_family(in, four_graph());
  EXPECT_EQ(fam, (CompleteSetFamily{{0, 2}, {2, 3}, {1, 3}}));
  std::istringstream bad("1,3\n5\n");
  EXPECT_NE(error_of([&] { io::read_family(bad, four_graph(), "f"); }).find("f:2"), std::string::npos);
}

TEST(ReadData, HeaderAndLabels) {
  std::istringstream in("x,y\n1,2\n3,4.5\n-1e-3,+7\n");
  const auto t = io::read_data(in);
  EXPECT_EQ(t.labels, (std::vector<std::string>{"x", "y"}));
  ASSERT_EQ(t.values.rows(), 3);
  EXPECT_EQ(t.values(2, 0), -1e-3);
  EXPECT_EQ(t.values(2, 1), 7.0);

  std::istringstream plain("1 2 3\n4 5 6\n");
  const auto u = io::read_data(plain, {.delimiter = ' ', .header = false});
  EXPECT_EQ(u.labels, (std::vector<std::string>{"X1", "X2", "X3"}));
}

TEST(ReadData, DiagnosticsCiteRowAndColumn) {
  std::istringstream bad("a,b\n1,2\n3,oops\n");
  const auto msg = error_of([&] { io::read_data(bad, {}, "d.csv"); });
  EXPECT_NE(msg.find("d.csv:3"), std::string::npos);
  EXPECT_NE(msg.find("column 2"), std::string::npos);
  std::istringstream ragged("a,b\n1,2\n3\n");
  EXPECT_NE(error_of([&] { io::read_data(ragged, {}, "d.csv"); }).find("d.csv:3"), std::string::npos);
  std::istringstream empty("");
  EXPECT_NE(error_of([&] { io::read_data(empty, {}, "d.csv"); }).find("no data"), std::string::npos);
}

TEST(ReadStats, TwoVariables) {
  std::istringstream in("n 10\nlabels a b\nsd 1 2\ncorr\n0\n");
  const auto st = io::read_stats(in);
  EXPECT_EQ(st.n, 10u);
  EXPECT_EQ(st.cov, (Matrix(2, 2) << 1, 0, 0, 4).finished());
}

TEST(ReadStats, YeastTableIsPositiveDefinite) {
  const auto st = io::read_stats_file(data_path("yeast_gal.stats"));
  EXPECT_EQ(st.n, 134u);
  EXPECT_EQ(st.dimension(), 8u);
  EXPECT_TRUE(st.positive_definite());
  EXPECT_NEAR(st.cov(4, 3), 0.87 * 1.70 * 1.70, 1e-12);  // X1, X2
}

TEST(ReadStats, Errors) {
  std::istringstream dup("n 10\nsd 1 1\ncorr\n1\n");
  EXPECT_THROW(io::read_stats(dup), NumericalError);
  std::istringstream big("n 10\nsd 1 1\ncorr\n1.2\n");
  EXPECT_THROW(io::read_stats(big), InputError);
  std::istringstream short_rows("n 10\nsd 1 1 1\ncorr\n0.1\n");
  EXPECT_THROW(io::read_stats(short_rows), InputError);
  std::istringstream no_n("sd 1 1\ncorr\n0.1\n");
  EXPECT_THROW(io::read_stats(no_n), InputError);
}

TEST(AlignToGraph, PermutesByLabel) {
  std::istringstream in("n 10\nlabels b a\nsd 2 1\nmean 5 6\ncorr\n0.5\n");
  const auto st = io::read_stats(in);
  CovarianceGraph g({"a", "b"}, std::vector<std::pair<std::string, std::string>>{{"a", "b"}});
  const auto al = io::align_to_graph(st, g);
  EXPECT_EQ(al.cov(0, 0), 1.0);
  EXPECT_EQ(al.cov(1, 1), 4.0);
  EXPECT_EQ(al.mean(0), 6.0);
  CovarianceGraph other({"a", "c"});
  EXPECT_THROW(io::align_to_graph(st, other), InputError);
}

TEST(WriteMatrix, RoundTripAtFullPrecision) {
  std::mt19937_64 rng(1);
  const Matrix m = random_spd(5, rng);
  const std::vector<std::string> labels{"v1", "v2", "v3", "v4", "v5"};
  std::stringstream buf;
  buf << "# comment line\n";
  io::write_matrix(buf, m, labels);
  const auto back = io::read_matrix(buf);
  EXPECT_EQ(back.labels, labels);
  EXPECT_EQ(back.values, m);  // bit-exact
}

TEST(WriteMatrix, FixedDigits) {
  std::ostringstream out;
  io::write_matrix(out, (Matrix(1, 1) << 0.123456).finished(), {"x"}, 2);
  EXPECT_EQ(out.str(), ",x\nx,0.12\n");
  std::ostringstream neg;
  io::write_matrix(neg, (Matrix(1, 2) << -1e-9, -0.0).finished(), {"a", "b"}, 3);
  EXPECT_EQ(neg.str(), ",a,b\na,0.000,0.000\n");
}
