#pragma once

#include <algorithm>
#include <cstddef>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "covgraph/error.hpp"

namespace covgraph {

// Sorted, duplicate-free list of vertex indices.
using VertexSet = std::vector<std::size_t>;
using IndexPair = std::pair<std::size_t, std::size_t>;

/// Bi-directed graph whose missing edges encode zero covariances.
///
/// Vertex order is the order of declaration and fixes the row/column order
/// of every matrix associated with the graph. Instances are immutable.
class CovarianceGraph {
 public:
  CovarianceGraph() = default;

  explicit CovarianceGraph(std::vector<std::string> vertices,
                           const std::vector<std::pair<std::string, std::string>>& edges = {})
      : labels_(std::move(vertices)), adj_(labels_.size() * labels_.size(), 0) {
    for (std::size_t i = 0; i < labels_.size(); ++i) {
      if (labels_[i].empty()) throw InputError("empty vertex label");
      if (!index_.emplace(labels_[i], i).second)
        throw InputError("duplicate vertex '" + labels_[i] + "'");
    }
    for (const auto& [a, b] : edges) add_edge(index(a), index(b));
  }

  CovarianceGraph(std::vector<std::string> vertices, const std::vector<IndexPair>& edges)
      : CovarianceGraph(std::move(vertices)) {
    for (const auto& [i, j] : edges) {
      if (i >= size() || j >= size()) throw InputError("edge endpoint out of range");
      add_edge(i, j);
    }
  }

  static CovarianceGraph complete(std::vector<std::string> vertices) {
    CovarianceGraph g(std::move(vertices));
    for (std::size_t i = 0; i < g.size(); ++i)
      for (std::size_t j = i + 1; j < g.size(); ++j) g.add_edge(i, j);
    return g;
  }

  // Vertices named "1".."p".
  static std::vector<std::string> numbered(std::size_t p) {
    std::vector<std::string> v;
    for (std::size_t i = 1; i <= p; ++i) v.push_back(std::to_string(i));
    return v;
  }

  std::size_t size() const { return labels_.size(); }
  std::size_t num_edges() const { return num_edges_; }
  const std::vector<std::string>& labels() const { return labels_; }
  const std::string& label(std::size_t i) const { return labels_.at(i); }

  bool has_vertex(const std::string& label) const { return index_.count(label) > 0; }

  std::size_t index(const std::string& label) const {
    auto it = index_.find(label);
    if (it == index_.end()) throw InputError("unknown vertex '" + label + "'");
    return it->second;
  }

  VertexSet indices(const std::vector<std::string>& labels) const {
    VertexSet out;
    for (const auto& l : labels) out.push_back(index(l));
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }

  bool adjacent(std::size_t i, std::size_t j) const { return adj_[i * size() + j] != 0; }

  // Edges (i, j) with i < j in lexicographic order.
  std::vector<IndexPair> edges() const {
    std::vector<IndexPair> out;
    for (std::size_t i = 0; i < size(); ++i)
      for (std::size_t j = i + 1; j < size(); ++j)
        if (adjacent(i, j)) out.emplace_back(i, j);
    return out;
  }

  // Pairs i < j that are not joined; these carry the zero constraints.
  std::vector<IndexPair> missing_edges() const {
    std::vector<IndexPair> out;
    for (std::size_t i = 0; i < size(); ++i)
      for (std::size_t j = i + 1; j < size(); ++j)
        if (!adjacent(i, j)) out.emplace_back(i, j);
    return out;
  }

  bool is_complete(const VertexSet& c) const {
    for (std::size_t a = 0; a < c.size(); ++a)
      for (std::size_t b = a + 1; b < c.size(); ++b)
        if (!adjacent(c[a], c[b])) return false;
    return true;
  }

  friend bool operator==(const CovarianceGraph& a, const CovarianceGraph& b) {
    return a.labels_ == b.labels_ && a.adj_ == b.adj_;
  }

 private:
  void add_edge(std::size_t i, std::size_t j) {
    if (i == j) throw InputError("self-loop at vertex '" + labels_[i] + "'");
    if (adjacent(i, j))
      throw InputError("duplicate edge " + labels_[i] + " <-> " + labels_[j]);
    adj_[i * size() + j] = adj_[j * size() + i] = 1;
    ++num_edges_;
  }

  std::vector<std::string> labels_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<char> adj_;
  std::size_t num_edges_ = 0;
};

inline void check_vertex(const CovarianceGraph& g, std::size_t i) {
  if (i >= g.size()) throw InputError("vertex index " + std::to_string(i) + " out of range");
}

inline VertexSet spouses(const CovarianceGraph& g, std::size_t i) {
  check_vertex(g, i);
  VertexSet out;
  for (std::size_t j = 0; j < g.size(); ++j)
    if (j != i && g.adjacent(i, j)) out.push_back(j);
  return out;
}

inline VertexSet spouses(const CovarianceGraph& g, const std::string& label) {
  return spouses(g, g.index(label));
}

inline VertexSet non_spouses(const CovarianceGraph& g, std::size_t i) {
  check_vertex(g, i);
  VertexSet out;
  for (std::size_t j = 0; j < g.size(); ++j)
    if (j != i && !g.adjacent(i, j)) out.push_back(j);
  return out;
}

// Vertices outside c adjacent to at least one member of c.
inline VertexSet spouses_of_set(const CovarianceGraph& g, const VertexSet& c) {
  std::vector<char> in_c(g.size(), 0);
  for (auto i : c) {
    check_vertex(g, i);
    in_c[i] = 1;
  }
  VertexSet out;
  for (std::size_t j = 0; j < g.size(); ++j) {
    if (in_c[j]) continue;
    for (auto i : c)
      if (g.adjacent(i, j)) {
        out.push_back(j);
        break;
      }
  }
  return out;
}

inline VertexSet spouses_of_set(const CovarianceGraph& g, const std::vector<std::string>& c) {
  return spouses_of_set(g, g.indices(c));
}

inline VertexSet complement(std::size_t p, const VertexSet& c) {
  std::vector<char> in_c(p, 0);
  for (auto i : c) in_c[i] = 1;
  VertexSet out;
  for (std::size_t j = 0; j < p; ++j)
    if (!in_c[j]) out.push_back(j);
  return out;
}

/// Index pairs of the unrestricted entries of a covariance matrix in P(G):
/// all diagonal pairs in vertex order, then the edges in lexicographic order.
class FreeIndexSet {
 public:
  FreeIndexSet() = default;
  explicit FreeIndexSet(const CovarianceGraph& g) : p_(g.size()), pos_(p_ * p_, npos) {
    for (std::size_t i = 0; i < p_; ++i) pairs_.emplace_back(i, i);
    for (const auto& e : g.edges()) pairs_.push_back(e);
    for (std::size_t k = 0; k < pairs_.size(); ++k) {
      auto [i, j] = pairs_[k];
      pos_[i * p_ + j] = pos_[j * p_ + i] = k;
    }
  }

  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

  std::size_t size() const { return pairs_.size(); }
  std::size_t dimension() const { return p_; }
  const IndexPair& operator[](std::size_t k) const { return pairs_[k]; }
  const std::vector<IndexPair>& pairs() const { return pairs_; }
  auto begin() const { return pairs_.begin(); }
  auto end() const { return pairs_.end(); }

  // Position of (i, j) or (j, i) in the list, npos if the entry is fixed at zero.
  std::size_t position(std::size_t i, std::size_t j) const { return pos_[i * p_ + j]; }
  bool contains(std::size_t i, std::size_t j) const { return position(i, j) != npos; }

 private:
  std::size_t p_ = 0;
  std::vector<IndexPair> pairs_;
  std::vector<std::size_t> pos_;
};

inline FreeIndexSet free_index_set(const CovarianceGraph& g) { return FreeIndexSet(g); }

using CompleteSetFamily = std::vector<VertexSet>;

namespace detail {

// Bron-Kerbosch with Tomita pivoting; candidate sets kept sorted so the
// output order depends only on the graph.
inline void bron_kerbosch(const CovarianceGraph& g, VertexSet& r, VertexSet p, VertexSet x,
                          CompleteSetFamily& out) {
  if (p.empty() && x.empty()) {
    VertexSet clique = r;
    std::sort(clique.begin(), clique.end());
    out.push_back(std::move(clique));
    return;
  }
  std::size_t pivot = 0;
  std::size_t best = 0;
  bool have_pivot = false;
  for (const VertexSet* s : {&p, &x}) {
    for (auto u : *s) {
      std::size_t cnt = 0;
      for (auto v : p) cnt += g.adjacent(u, v) ? 1 : 0;
      if (!have_pivot || cnt > best) {
        pivot = u;
        best = cnt;
        have_pivot = true;
      }
    }
  }
  VertexSet todo;
  for (auto v : p)
    if (!g.adjacent(pivot, v)) todo.push_back(v);
  for (auto v : todo) {
    VertexSet np, nx;
    for (auto w : p)
      if (g.adjacent(v, w)) np.push_back(w);
    for (auto w : x)
      if (g.adjacent(v, w)) nx.push_back(w);
    r.push_back(v);
    bron_kerbosch(g, r, std::move(np), std::move(nx), out);
    r.pop_back();
    p.erase(std::find(p.begin(), p.end(), v));
    x.insert(std::upper_bound(x.begin(), x.end(), v), v);
  }
}

}  // namespace detail

/// Maximal complete sets, each sorted, listed in lexicographic order.
inline CompleteSetFamily cliques(const CovarianceGraph& g) {
  CompleteSetFamily out;
  VertexSet r;
  VertexSet all(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) all[i] = i;
  detail::bron_kerbosch(g, r, all, {}, out);
  std::sort(out.begin(), out.end());
  return out;
}

inline CompleteSetFamily singletons(const CovarianceGraph& g) {
  CompleteSetFamily out;
  for (std::size_t i = 0; i < g.size(); ++i) out.push_back({i});
  return out;
}

struct FamilyViolation {
  enum class Kind { EmptySet, UnknownVertex, NotComplete, NotCovering };
  Kind kind;
  std::size_t set_index = 0;     // offending set (EmptySet/UnknownVertex/NotComplete)
  IndexPair missing_pair{0, 0};  // absent edge (NotComplete)
  std::size_t vertex = 0;        // uncovered or unknown vertex
  std::string message;
};

/// Checks that every set is complete and the sets jointly cover V.
/// Reports the first problem found; never throws.
inline std::optional<FamilyViolation> validate_family(const CovarianceGraph& g,
                                                      const CompleteSetFamily& fam) {
  using Kind = FamilyViolation::Kind;
  std::vector<char> covered(g.size(), 0);
  for (std::size_t s = 0; s < fam.size(); ++s) {
    const auto& c = fam[s];
    if (c.empty())
      return FamilyViolation{Kind::EmptySet, s, {0, 0}, 0,
                             "set " + std::to_string(s + 1) + " is empty"};
    for (auto v : c) {
      if (v >= g.size())
        return FamilyViolation{Kind::UnknownVertex, s, {0, 0}, v,
                               "set " + std::to_string(s + 1) + " has unknown vertex index " +
                                   std::to_string(v)};
    }
    for (std::size_t a = 0; a < c.size(); ++a)
      for (std::size_t b = a + 1; b < c.size(); ++b)
        if (c[a] != c[b] && !g.adjacent(c[a], c[b]))
          return FamilyViolation{Kind::NotComplete, s, {c[a], c[b]}, 0,
                                 "set " + std::to_string(s + 1) + " is not complete: " +
                                     g.label(c[a]) + " <-> " + g.label(c[b]) + " absent"};
    for (auto v : c) covered[v] = 1;
  }
  for (std::size_t v = 0; v < g.size(); ++v)
    if (!covered[v])
      return FamilyViolation{Kind::NotCovering, 0, {0, 0}, v,
                             "vertex " + g.label(v) + " is not covered by the family"};
  return std::nullopt;
}

/// Connected components of the subgraph induced by `within`, each sorted.
inline std::vector<VertexSet> connected_components(const CovarianceGraph& g,
                                                   const VertexSet& within) {
  std::vector<char> active(g.size(), 0), seen(g.size(), 0);
  for (auto v : within) active[v] = 1;
  std::vector<VertexSet> out;
  for (auto start : within) {
    if (seen[start]) continue;
    VertexSet comp;
    std::vector<std::size_t> stack{start};
    seen[start] = 1;
    while (!stack.empty()) {
      auto u = stack.back();
      stack.pop_back();
      comp.push_back(u);
      for (std::size_t w = 0; w < g.size(); ++w)
        if (active[w] && !seen[w] && g.adjacent(u, w)) {
          seen[w] = 1;
          stack.push_back(w);
        }
    }
    std::sort(comp.begin(), comp.end());
    out.push_back(std::move(comp));
  }
  return out;
}

/// Union of the components of G[within] that contain at least one vertex of `targets`.
inline VertexSet components_touching(const CovarianceGraph& g, const VertexSet& within,
                                     const VertexSet& targets) {
  VertexSet out;
  for (const auto& comp : connected_components(g, within)) {
    bool hit = std::any_of(comp.begin(), comp.end(), [&](std::size_t v) {
      return std::binary_search(targets.begin(), targets.end(), v);
    });
    if (hit) out.insert(out.end(), comp.begin(), comp.end());
  }
  std::sort(out.begin(), out.end());
  return out;
}

/// Chordality via maximum cardinality search and a perfect elimination check.
inline bool is_decomposable(const CovarianceGraph& g) {
  const std::size_t p = g.size();
  std::vector<std::size_t> weight(p, 0), order;
  std::vector<char> numbered(p, 0);
  for (std::size_t step = 0; step < p; ++step) {
    std::size_t best = p;
    for (std::size_t v = 0; v < p; ++v)
      if (!numbered[v] && (best == p || weight[v] > weight[best])) best = v;
    numbered[best] = 1;
    order.push_back(best);
    for (std::size_t w = 0; w < p; ++w)
      if (!numbered[w] && g.adjacent(best, w)) ++weight[w];
  }
  // In MCS order, the earlier neighbours of each vertex must form a clique.
  std::vector<std::size_t> pos(p);
  for (std::size_t k = 0; k < p; ++k) pos[order[k]] = k;
  for (std::size_t k = 0; k < p; ++k) {
    VertexSet earlier;
    for (std::size_t w = 0; w < p; ++w)
      if (g.adjacent(order[k], w) && pos[w] < k) earlier.push_back(w);
    if (!g.is_complete(earlier)) return false;
  }
  return true;
}

struct PerfectSequence {
  CompleteSetFamily cliques;     // in running-intersection order
  CompleteSetFamily separators;  // separators[k] = cliques[k] ∩ (cliques[0..k-1]); [0] empty
};

/// Orders the cliques of a decomposable graph by a maximum-weight spanning
/// tree of the clique-intersection graph (Prim), which yields a sequence with
/// the running intersection property.
inline PerfectSequence perfect_sequence(const CovarianceGraph& g) {
  if (!is_decomposable(g)) throw InputError("graph is not decomposable");
  auto cl = cliques(g);
  PerfectSequence seq;
  if (cl.empty()) return seq;
  auto overlap = [](const VertexSet& a, const VertexSet& b) {
    VertexSet out;
    std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
    return out;
  };
  std::vector<char> used(cl.size(), 0);
  std::vector<std::size_t> order{0};
  used[0] = 1;
  seq.cliques.push_back(cl[0]);
  seq.separators.push_back({});
  while (order.size() < cl.size()) {
    std::size_t best = cl.size(), parent = 0, best_w = 0;
    for (std::size_t c = 0; c < cl.size(); ++c) {
      if (used[c]) continue;
      for (auto o : order) {
        auto w = overlap(cl[c], cl[o]).size();
        if (best == cl.size() || w > best_w) {
          best = c;
          parent = o;
          best_w = w;
        }
      }
    }
    used[best] = 1;
    order.push_back(best);
    seq.cliques.push_back(cl[best]);
    seq.separators.push_back(overlap(cl[best], cl[parent]));
  }
  return seq;
}

}  // namespace covgraph
