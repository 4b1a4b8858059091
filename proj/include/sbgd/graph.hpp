#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "errors.hpp"

namespace sbgd {

/// Undirected simple graph with dense binary adjacency and an n x F real
/// feature matrix (F may be zero).
class Graph {
 public:
  Graph() = default;

  explicit Graph(std::size_t n, std::size_t feature_dim = 0)
      : n_(n), f_(feature_dim), adj_(n * n, 0), features_(n * feature_dim, 0.0) {}

  std::size_t n() const { return n_; }
  std::size_t feature_dim() const { return f_; }

  bool has_edge(std::size_t u, std::size_t v) const { return adj_[u * n_ + v] != 0; }

  void add_edge(std::size_t u, std::size_t v) { set_edge(u, v, true); }
  void remove_edge(std::size_t u, std::size_t v) { set_edge(u, v, false); }

  void set_edge(std::size_t u, std::size_t v, bool present) {
    require(u < n_ && v < n_, "Graph::set_edge: node out of range");
    require(u != v, "Graph::set_edge: self-loop at node " + std::to_string(u));
    adj_[u * n_ + v] = adj_[v * n_ + u] = present ? 1 : 0;
  }

  double feature(std::size_t v, std::size_t k) const { return features_[v * f_ + k]; }
  double& feature(std::size_t v, std::size_t k) { return features_[v * f_ + k]; }

  const std::vector<std::uint8_t>& adjacency() const { return adj_; }
  const std::vector<double>& features() const { return features_; }
  std::vector<double>& features() { return features_; }

  std::size_t degree(std::size_t v) const {
    std::size_t d = 0;
    for (std::size_t u = 0; u < n_; ++u) d += adj_[v * n_ + u];
    return d;
  }

  std::size_t edge_count() const {
    std::size_t e = 0;
    for (std::size_t u = 0; u < n_; ++u)
      for (std::size_t v = u + 1; v < n_; ++v) e += adj_[u * n_ + v];
    return e;
  }

  std::vector<std::pair<std::size_t, std::size_t>> edges() const {
    std::vector<std::pair<std::size_t, std::size_t>> out;
    for (std::size_t u = 0; u < n_; ++u)
      for (std::size_t v = u + 1; v < n_; ++v)
        if (adj_[u * n_ + v]) out.emplace_back(u, v);
    return out;
  }

  std::vector<std::vector<std::size_t>> adjacency_lists() const {
    std::vector<std::vector<std::size_t>> out(n_);
    for (std::size_t u = 0; u < n_; ++u)
      for (std::size_t v = 0; v < n_; ++v)
        if (adj_[u * n_ + v]) out[u].push_back(v);
    return out;
  }

  double density() const {
    if (n_ < 2) return 0.0;
    return static_cast<double>(edge_count()) / (static_cast<double>(n_) * (n_ - 1) / 2.0);
  }

  /// Checks symmetry, zero diagonal, binary entries and feature row count.
  void validate() const {
    require(adj_.size() == n_ * n_, "Graph: adjacency size does not match n");
    require(features_.size() == n_ * f_, "Graph: feature matrix size does not match n x F");
    for (std::size_t u = 0; u < n_; ++u) {
      require(adj_[u * n_ + u] == 0, "Graph: self-loop at node " + std::to_string(u));
      for (std::size_t v = u + 1; v < n_; ++v) {
        require(adj_[u * n_ + v] <= 1, "Graph: non-binary adjacency entry");
        require(adj_[u * n_ + v] == adj_[v * n_ + u], "Graph: asymmetric adjacency");
      }
    }
  }

  bool operator==(const Graph&) const = default;

 private:
  std::size_t n_ = 0;
  std::size_t f_ = 0;
  std::vector<std::uint8_t> adj_;
  std::vector<double> features_;
};

/// Number of connected components.
inline std::size_t component_count(const Graph& g) {
  std::vector<int> seen(g.n(), 0);
  std::size_t count = 0;
  std::vector<std::size_t> stack;
  for (std::size_t s = 0; s < g.n(); ++s) {
    if (seen[s]) continue;
    ++count;
    seen[s] = 1;
    stack.push_back(s);
    while (!stack.empty()) {
      const std::size_t u = stack.back();
      stack.pop_back();
      for (std::size_t v = 0; v < g.n(); ++v)
        if (g.has_edge(u, v) && !seen[v]) {
          seen[v] = 1;
          stack.push_back(v);
        }
    }
  }
  return count;
}

inline bool is_connected(const Graph& g) { return g.n() <= 1 || component_count(g) == 1; }

/// Relabels nodes: node v of `g` becomes node perm[v] of the result.
inline Graph permute(const Graph& g, const std::vector<std::size_t>& perm) {
  require(perm.size() == g.n(), "permute: permutation length differs from n");
  Graph out(g.n(), g.feature_dim());
  for (auto [u, v] : g.edges()) out.add_edge(perm[u], perm[v]);
  for (std::size_t v = 0; v < g.n(); ++v)
    for (std::size_t k = 0; k < g.feature_dim(); ++k) out.feature(perm[v], k) = g.feature(v, k);
  return out;
}

/// Assignment of nodes to k non-overlapping blocks.
struct Partition {
  std::vector<std::size_t> assignment;
  std::size_t k = 1;
  double balance_eps = 0.1;

  std::size_t n() const { return assignment.size(); }

  /// Upper bound on any block size, ceil((1 + eps) * n / k).
  std::size_t max_block_size() const {
    const double bound = (1.0 + balance_eps) * static_cast<double>(n()) / static_cast<double>(k);
    // guard against 3.0000000000000004 rounding up to 4
    return static_cast<std::size_t>(std::ceil(bound - 1e-9));
  }

  std::vector<std::size_t> block_sizes() const {
    std::vector<std::size_t> sizes(k, 0);
    for (auto b : assignment) sizes.at(b) += 1;
    return sizes;
  }

  std::vector<std::vector<std::size_t>> members() const {
    std::vector<std::vector<std::size_t>> out(k);
    for (std::size_t v = 0; v < assignment.size(); ++v) out.at(assignment[v]).push_back(v);
    return out;
  }

  bool is_balanced() const {
    const auto sizes = block_sizes();
    return std::all_of(sizes.begin(), sizes.end(),
                       [&](std::size_t s) { return s > 0 && s <= max_block_size(); });
  }

  /// Every block id in range and occupied, and block sizes within the bound.
  void validate(std::size_t expected_n) const {
    require(assignment.size() == expected_n, "Partition: assignment length " +
                                                 std::to_string(assignment.size()) + " != n " +
                                                 std::to_string(expected_n));
    require(k >= 1, "Partition: k must be positive");
    for (auto b : assignment) require(b < k, "Partition: block id " + std::to_string(b) + " >= k");
    require(is_balanced(), "Partition: empty or oversized block");
  }
};

inline std::size_t cut_size(const Graph& g, const Partition& p) {
  std::size_t cut = 0;
  for (auto [u, v] : g.edges()) cut += p.assignment[u] != p.assignment[v];
  return cut;
}

/// Rectangular binary matrix, rows x cols, row-major.
struct BinaryMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::uint8_t> bits;

  BinaryMatrix() = default;
  BinaryMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), bits(r * c, 0) {}

  std::uint8_t operator()(std::size_t i, std::size_t j) const { return bits[i * cols + j]; }
  std::uint8_t& operator()(std::size_t i, std::size_t j) { return bits[i * cols + j]; }
  std::size_t count() const { return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), 1)); }
  bool operator==(const BinaryMatrix&) const = default;
};

/// The induced block graphs C_i and the off-diagonal inter-block matrices
/// A_ij (i < j) of a partitioned graph; together they are A = A_bar + Delta.
struct BlockDecomposition {
  std::vector<Graph> blocks;
  std::vector<std::vector<std::size_t>> node_maps;  // block-local index -> original node
  std::vector<BinaryMatrix> inter;                  // packed upper triangle, see pair_index

  std::size_t k() const { return blocks.size(); }

  /// Position of pair (i, j), i < j, in `inter`.
  static std::size_t pair_index(std::size_t i, std::size_t j, std::size_t k) {
    require(i < j && j < k, "BlockDecomposition::pair_index: need i < j < k");
    return i * k - i * (i + 1) / 2 + (j - i - 1);
  }

  const BinaryMatrix& between(std::size_t i, std::size_t j) const { return inter[pair_index(i, j, k())]; }
  BinaryMatrix& between(std::size_t i, std::size_t j) { return inter[pair_index(i, j, k())]; }

  std::size_t total_nodes() const {
    std::size_t n = 0;
    for (const auto& m : node_maps) n += m.size();
    return n;
  }
};

inline Graph induced_subgraph(const Graph& g, const std::vector<std::size_t>& nodes) {
  Graph sub(nodes.size(), g.feature_dim());
  for (std::size_t a = 0; a < nodes.size(); ++a) {
    for (std::size_t b = a + 1; b < nodes.size(); ++b)
      if (g.has_edge(nodes[a], nodes[b])) sub.add_edge(a, b);
    for (std::size_t f = 0; f < g.feature_dim(); ++f) sub.feature(a, f) = g.feature(nodes[a], f);
  }
  return sub;
}

/// Splits `g` into its induced block graphs and inter-block matrices.
inline BlockDecomposition decompose(const Graph& g, const Partition& p) {
  require(p.assignment.size() == g.n(), "decompose: partition covers " +
                                            std::to_string(p.assignment.size()) + " nodes, graph has " +
                                            std::to_string(g.n()));
  BlockDecomposition d;
  d.node_maps = p.members();
  for (std::size_t i = 0; i < p.k; ++i) {
    require(!d.node_maps[i].empty(), "decompose: block " + std::to_string(i) + " is empty");
    d.blocks.push_back(induced_subgraph(g, d.node_maps[i]));
  }
  for (std::size_t i = 0; i < p.k; ++i) {
    for (std::size_t j = i + 1; j < p.k; ++j) {
      const auto& vi = d.node_maps[i];
      const auto& vj = d.node_maps[j];
      BinaryMatrix m(vi.size(), vj.size());
      for (std::size_t u = 0; u < vi.size(); ++u)
        for (std::size_t v = 0; v < vj.size(); ++v) m(u, v) = g.has_edge(vi[u], vj[v]) ? 1 : 0;
      d.inter.push_back(std::move(m));
    }
  }
  return d;
}

/// Inverse of `decompose`: places block edges, inter-block edges and block
/// features back at their original node indices.
inline Graph reassemble(const BlockDecomposition& d) {
  const std::size_t k = d.k();
  require(d.node_maps.size() == k, "reassemble: node_maps/blocks count mismatch");
  require(d.inter.size() == k * (k - 1) / 2, "reassemble: expected " +
                                                  std::to_string(k * (k - 1) / 2) + " inter matrices, got " +
                                                  std::to_string(d.inter.size()));
  const std::size_t n = d.total_nodes();
  const std::size_t f = k == 0 ? 0 : d.blocks.front().feature_dim();
  std::vector<int> owner(n, -1);
  for (std::size_t i = 0; i < k; ++i) {
    require(d.blocks[i].n() == d.node_maps[i].size(), "reassemble: block " + std::to_string(i) +
                                                          " size differs from its node map");
    require(d.blocks[i].feature_dim() == f, "reassemble: blocks disagree on feature width");
    for (auto v : d.node_maps[i]) {
      require(v < n, "reassemble: node index " + std::to_string(v) + " out of range");
      require(owner[v] < 0, "reassemble: node " + std::to_string(v) + " appears in two blocks");
      owner[v] = static_cast<int>(i);
    }
  }
  Graph g(n, f);
  for (std::size_t i = 0; i < k; ++i) {
    const auto& map = d.node_maps[i];
    for (auto [u, v] : d.blocks[i].edges()) g.add_edge(map[u], map[v]);
    for (std::size_t u = 0; u < map.size(); ++u)
      for (std::size_t c = 0; c < f; ++c) g.feature(map[u], c) = d.blocks[i].feature(u, c);
  }
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = i + 1; j < k; ++j) {
      const auto& m = d.between(i, j);
      require(m.rows == d.node_maps[i].size() && m.cols == d.node_maps[j].size(),
              "reassemble: inter matrix shape mismatch for pair (" + std::to_string(i) + "," +
                  std::to_string(j) + ")");
      for (std::size_t u = 0; u < m.rows; ++u)
        for (std::size_t v = 0; v < m.cols; ++v)
          if (m(u, v)) g.add_edge(d.node_maps[i][u], d.node_maps[j][v]);
    }
  }
  return g;
}

}  // namespace sbgd
