#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <optional>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "covgraph/gaussian_model.hpp"
#include "covgraph/graph.hpp"

namespace covgraph::io {

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

// Strips a trailing '#' comment and surrounding whitespace.
inline std::string strip_comment(const std::string& line) {
  return trim(std::string_view(line).substr(0, line.find('#')));
}

inline std::vector<std::string> split_ws(const std::string& s) {
  std::istringstream is(s);
  std::vector<std::string> out;
  for (std::string tok; is >> tok;) out.push_back(tok);
  return out;
}

inline std::vector<std::string> split(const std::string& s, char delim) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : s) {
    if (ch == delim) {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  out.push_back(trim(cur));
  return out;
}

inline std::optional<double> parse_double(const std::string& s) {
  if (s.empty()) return std::nullopt;
  const char* first = s.data();
  if (*first == '+') ++first;
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

inline std::ifstream open(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open '" + path + "'");
  return in;
}

inline std::string where(const std::string& source, std::size_t line) {
  return source + ":" + std::to_string(line) + ": ";
}

}  // namespace detail

/// Graph file: `vertex <label>` lines, then `edge <label> <label>` lines; '#' comments.
inline CovarianceGraph read_graph(std::istream& in, const std::string& source = "graph") {
  std::vector<std::string> vertices;
  std::vector<std::pair<std::string, std::string>> edges;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto tok = detail::split_ws(detail::strip_comment(line));
    if (tok.empty()) continue;
    if (tok[0] == "vertex") {
      if (tok.size() != 2) throw InputError(detail::where(source, lineno) + "expected 'vertex <label>'");
      if (!edges.empty()) throw InputError(detail::where(source, lineno) + "vertex declared after edges");
      vertices.push_back(tok[1]);
    } else if (tok[0] == "edge") {
      if (tok.size() != 3) throw InputError(detail::where(source, lineno) + "expected 'edge <label> <label>'");
      for (std::size_t k = 1; k < 3; ++k)
        if (std::find(vertices.begin(), vertices.end(), tok[k]) == vertices.end())
          throw InputError(detail::where(source, lineno) + "unknown vertex '" + tok[k] + "'");
      edges.emplace_back(tok[1], tok[2]);
    } else {
      throw InputError(detail::where(source, lineno) + "unknown declaration '" + tok[0] + "'");
    }
  }
  try {
    return CovarianceGraph(vertices, edges);
  } catch (const InputError& e) {
    throw InputError(source + ": " + e.what());
  }
}

inline CovarianceGraph read_graph_file(const std::string& path) {
  auto in = detail::open(path);
  return read_graph(in, path);
}

inline void write_graph(std::ostream& os, const CovarianceGraph& g) {
  for (const auto& l : g.labels()) os << "vertex " << l << '\n';
  for (const auto& [i, j] : g.edges()) os << "edge " << g.label(i) << ' ' << g.label(j) << '\n';
}

/// Family file: one complete set per line, labels separated by commas.
inline CompleteSetFamily read_family(std::istream& in, const CovarianceGraph& g,
                                     const std::string& source = "family") {
  CompleteSetFamily fam;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto body = detail::strip_comment(line);
    if (body.empty()) continue;
    std::vector<std::string> labels;
    for (auto& l : detail::split(body, ','))
      if (!l.empty()) labels.push_back(l);
    try {
      fam.push_back(g.indices(labels));
    } catch (const InputError& e) {
      throw InputError(detail::where(source, lineno) + e.what());
    }
  }
  return fam;
}

inline CompleteSetFamily read_family_file(const std::string& path, const CovarianceGraph& g) {
  auto in = detail::open(path);
  return read_family(in, g, path);
}

struct DataTable {
  Matrix values;  // n x p
  std::vector<std::string> labels;
};

struct DataOptions {
  char delimiter = ',';
  bool header = true;
};

/// Delimited numeric table. Labels come from the header row, or X1..Xp.
inline DataTable read_data(std::istream& in, const DataOptions& opt = {}, const std::string& source = "data") {
  DataTable t;
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t lineno = 0;
  bool header_pending = opt.header;
  std::size_t width = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto body = detail::trim(line);
    if (body.empty() || body[0] == '#') continue;
    auto cells = detail::split(body, opt.delimiter);
    if (header_pending) {
      t.labels = cells;
      width = cells.size();
      header_pending = false;
      continue;
    }
    if (width == 0) width = cells.size();
    if (cells.size() != width)
      throw InputError(detail::where(source, lineno) + "expected " + std::to_string(width) + " columns, found " +
                       std::to_string(cells.size()));
    std::vector<double> row;
    for (std::size_t c = 0; c < cells.size(); ++c) {
      auto v = detail::parse_double(cells[c]);
      if (!v)
        throw InputError(detail::where(source, lineno) + "column " + std::to_string(c + 1) +
                         ": non-numeric value '" + cells[c] + "'");
      row.push_back(*v);
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw InputError(source + ": no data rows");
  if (t.labels.empty())
    for (std::size_t c = 0; c < width; ++c) t.labels.push_back("X" + std::to_string(c + 1));
  t.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(width));
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < width; ++c) t.values(r, c) = rows[r][c];
  return t;
}

inline DataTable read_data_file(const std::string& path, const DataOptions& opt = {}) {
  auto in = detail::open(path);
  return read_data(in, opt, path);
}

/// Summary statistics file:
///   n <count>
///   labels <l1> ... <lp>
///   sd <s1> ... <sp>
///   mean <m1> ... <mp>      (optional)
///   corr
///   <r21>
///   <r31> <r32>
///   ...                     (strictly lower triangle, p - 1 rows)
inline SampleStats read_stats(std::istream& in, const std::string& source = "stats") {
  std::size_t n = 0;
  std::vector<std::string> labels;
  std::vector<double> sd, mean;
  std::vector<std::vector<double>> corr_rows;
  bool in_corr = false;
  std::string line;
  std::size_t lineno = 0;
  auto numbers = [&](const std::vector<std::string>& tok, std::size_t from) {
    std::vector<double> out;
    for (std::size_t k = from; k < tok.size(); ++k) {
      auto v = detail::parse_double(tok[k]);
      if (!v) throw InputError(detail::where(source, lineno) + "non-numeric value '" + tok[k] + "'");
      out.push_back(*v);
    }
    return out;
  };
  while (std::getline(in, line)) {
    ++lineno;
    const auto tok = detail::split_ws(detail::strip_comment(line));
    if (tok.empty()) continue;
    if (in_corr) {
      corr_rows.push_back(numbers(tok, 0));
      continue;
    }
    if (tok[0] == "n") {
      auto v = tok.size() == 2 ? detail::parse_double(tok[1]) : std::nullopt;
      if (!v || *v < 2 || *v != std::floor(*v))
        throw InputError(detail::where(source, lineno) + "expected 'n <integer >= 2>'");
      n = static_cast<std::size_t>(*v);
    } else if (tok[0] == "labels") {
      labels.assign(tok.begin() + 1, tok.end());
    } else if (tok[0] == "sd") {
      sd = numbers(tok, 1);
    } else if (tok[0] == "mean") {
      mean = numbers(tok, 1);
    } else if (tok[0] == "corr") {
      in_corr = true;
    } else {
      throw InputError(detail::where(source, lineno) + "unknown keyword '" + tok[0] + "'");
    }
  }
  if (n == 0) throw InputError(source + ": missing 'n'");
  if (sd.empty()) throw InputError(source + ": missing 'sd'");
  const std::size_t p = sd.size();
  if (labels.empty())
    for (std::size_t i = 0; i < p; ++i) labels.push_back("X" + std::to_string(i + 1));
  if (labels.size() != p) throw InputError(source + ": label count differs from sd count");
  if (!mean.empty() && mean.size() != p) throw InputError(source + ": mean count differs from sd count");
  if (!in_corr && p > 1) throw InputError(source + ": missing 'corr' block");
  if (corr_rows.size() != p - 1)
    throw InputError(source + ": expected " + std::to_string(p - 1) + " correlation rows, found " +
                     std::to_string(corr_rows.size()));
  Matrix cov(p, p);
  for (std::size_t i = 0; i < p; ++i) {
    if (!(sd[i] > 0.0)) throw InputError(source + ": standard deviations must be positive");
    cov(i, i) = sd[i] * sd[i];
  }
  for (std::size_t i = 1; i < p; ++i) {
    const auto& row = corr_rows[i - 1];
    if (row.size() != i)
      throw InputError(source + ": correlation row for " + labels[i] + " needs " + std::to_string(i) +
                       " entries, found " + std::to_string(row.size()));
    for (std::size_t j = 0; j < i; ++j) {
      if (std::abs(row[j]) > 1.0)
        throw InputError(source + ": correlation " + labels[i] + "," + labels[j] + " outside [-1, 1]");
      cov(i, j) = cov(j, i) = row[j] * sd[i] * sd[j];
    }
  }
  if (!is_positive_definite(cov)) throw NumericalError(source + ": covariance matrix is not positive definite");
  auto stats = stats_from_covariance(cov, n, labels);
  if (!mean.empty()) stats.mean = Eigen::Map<const Vector>(mean.data(), static_cast<Eigen::Index>(p));
  return stats;
}

inline SampleStats read_stats_file(const std::string& path) {
  auto in = detail::open(path);
  return read_stats(in, path);
}

/// Permutes stats into the vertex order of g, matching by label.
inline SampleStats align_to_graph(const SampleStats& stats, const CovarianceGraph& g) {
  if (stats.labels.size() != g.size())
    throw InputError("data have " + std::to_string(stats.labels.size()) + " variables, graph has " +
                     std::to_string(g.size()) + " vertices");
  std::vector<Eigen::Index> perm;
  for (const auto& l : g.labels()) {
    auto it = std::find(stats.labels.begin(), stats.labels.end(), l);
    if (it == stats.labels.end()) throw InputError("graph vertex '" + l + "' not found in data labels");
    perm.push_back(it - stats.labels.begin());
  }
  SampleStats out = stats;
  out.cov = stats.cov(perm, perm);
  out.mean = stats.mean(perm);
  out.labels = g.labels();
  return out;
}

inline DataTable align_to_graph(const DataTable& t, const CovarianceGraph& g) {
  if (t.labels.size() != g.size())
    throw InputError("data have " + std::to_string(t.labels.size()) + " columns, graph has " +
                     std::to_string(g.size()) + " vertices");
  std::vector<Eigen::Index> perm;
  for (const auto& l : g.labels()) {
    auto it = std::find(t.labels.begin(), t.labels.end(), l);
    if (it == t.labels.end()) throw InputError("graph vertex '" + l + "' not found in data header");
    perm.push_back(it - t.labels.begin());
  }
  return {t.values(Eigen::all, perm), g.labels()};
}

/// Labelled square matrix: header ",l1,...,lp" then one "label,v1,...,vp" row
/// per variable. digits < 0 writes 17 significant digits (exact round trip);
/// otherwise fixed notation with that many decimals.
inline void write_matrix(std::ostream& os, const Matrix& m, const std::vector<std::string>& labels,
                         int digits = -1) {
  std::ostringstream out;
  if (digits < 0)
    out << std::setprecision(17);
  else
    out << std::fixed << std::setprecision(digits);
  for (const auto& l : labels) out << ',' << l;
  out << '\n';
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    out << labels[i];
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      double v = m(i, j);
      if (digits >= 0 && std::abs(v) < 0.5 * std::pow(10.0, -digits)) v = 0.0;
      out << ',' << (v == 0.0 ? 0.0 : v);  // no "-0"
    }
    out << '\n';
  }
  os << out.str();
}

struct LabelledMatrix {
  Matrix values;
  std::vector<std::string> labels;
};

inline LabelledMatrix read_matrix(std::istream& in, const std::string& source = "matrix") {
  LabelledMatrix out;
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t lineno = 0;
  bool header = true;
  while (std::getline(in, line)) {
    ++lineno;
    const auto body = detail::trim(line);
    if (body.empty() || body[0] == '#') continue;
    auto cells = detail::split(body, ',');
    if (header) {
      out.labels.assign(cells.begin() + 1, cells.end());
      header = false;
      continue;
    }
    if (cells.size() != out.labels.size() + 1 || rows.size() >= out.labels.size())
      throw InputError(detail::where(source, lineno) + "row has wrong number of columns");
    if (cells[0] != out.labels[rows.size()])
      throw InputError(detail::where(source, lineno) + "row label '" + cells[0] + "' does not match header");
    std::vector<double> row;
    for (std::size_t c = 1; c < cells.size(); ++c) {
      auto v = detail::parse_double(cells[c]);
      if (!v) throw InputError(detail::where(source, lineno) + "non-numeric value '" + cells[c] + "'");
      row.push_back(*v);
    }
    rows.push_back(std::move(row));
  }
  if (rows.size() != out.labels.size() || rows.empty()) throw InputError(source + ": matrix is not square");
  out.values.resize(rows.size(), rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows.size(); ++j) out.values(i, j) = rows[i][j];
  return out;
}

inline LabelledMatrix read_matrix_file(const std::string& path) {
  auto in = detail::open(path);
  return read_matrix(in, path);
}

}  // namespace covgraph::io
