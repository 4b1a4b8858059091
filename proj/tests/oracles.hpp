#pragma once

// Independent brute-force references for the evaluation metrics.

#include <algorithm>
#include <array>
#include <functional>
#include <map>
#include <numeric>
#include <set>
#include <vector>

#include "sbgd/graph.hpp"

namespace sbgd::oracle {

/// Graph on n <= 8 nodes as an upper-triangle bitmask.
inline std::uint64_t bits_of(const Graph& g) {
  std::uint64_t b = 0;
  std::size_t k = 0;
  for (std::size_t u = 0; u < g.n(); ++u)
    for (std::size_t v = u + 1; v < g.n(); ++v, ++k)
      if (g.has_edge(u, v)) b |= std::uint64_t{1} << k;
  return b;
}

/// Stable colour refinement with canonical colour names, so that equal
/// colours in two graphs mean equal refinement histories.
inline std::vector<std::size_t> refined_colours(const Graph& g) {
  const std::size_t n = g.n();
  std::vector<std::size_t> c(n, 0);
  for (std::size_t round = 0; round <= n; ++round) {
    std::vector<std::vector<std::size_t>> sig(n);
    for (std::size_t v = 0; v < n; ++v) {
      sig[v].push_back(c[v]);
      std::vector<std::size_t> nb;
      for (std::size_t u = 0; u < n; ++u)
        if (g.has_edge(u, v)) nb.push_back(c[u]);
      std::sort(nb.begin(), nb.end());
      sig[v].insert(sig[v].end(), nb.begin(), nb.end());
    }
    std::vector<std::vector<std::size_t>> sorted(sig);
    std::sort(sorted.begin(), sorted.end());
    sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
    std::vector<std::size_t> next(n);
    for (std::size_t v = 0; v < n; ++v)
      next[v] = static_cast<std::size_t>(std::lower_bound(sorted.begin(), sorted.end(), sig[v]) - sorted.begin());
    const auto classes = [](const std::vector<std::size_t>& x) { return std::set<std::size_t>(x.begin(), x.end()).size(); };
    const bool stable = classes(next) == classes(c);
    c = next;
    if (stable) break;
  }
  return c;
}

/// Canonical form: the smallest bitmask over all relabellings that list the
/// nodes in colour order, permuting freely inside each colour class.
inline std::uint64_t canonical_form(const Graph& g) {
  const std::size_t n = g.n();
  const auto col = refined_colours(g);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return col[a] < col[b]; });
  std::vector<std::pair<std::size_t, std::size_t>> ranges;  // [begin, end) of each colour class
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && col[order[j]] == col[order[i]]) ++j;
    ranges.emplace_back(i, j);
    i = j;
  }
  std::uint64_t best = ~std::uint64_t{0};
  auto evaluate = [&] {
    std::uint64_t b = 0;
    std::size_t k = 0;
    for (std::size_t u = 0; u < n; ++u)
      for (std::size_t v = u + 1; v < n; ++v, ++k)
        if (g.has_edge(order[u], order[v])) b |= std::uint64_t{1} << k;
    best = std::min(best, b);
  };
  std::function<void(std::size_t)> rec = [&](std::size_t r) {
    if (r == ranges.size()) {
      evaluate();
      return;
    }
    auto [lo, hi] = ranges[r];
    std::sort(order.begin() + lo, order.begin() + hi);
    do rec(r + 1);
    while (std::next_permutation(order.begin() + lo, order.begin() + hi));
  };
  rec(0);
  return best ^ (std::uint64_t{n} << 58);
}

inline Graph from_bits(std::size_t n, std::uint64_t b) {
  Graph g(n);
  std::size_t k = 0;
  for (std::size_t u = 0; u < n; ++u)
    for (std::size_t v = u + 1; v < n; ++v, ++k)
      if (b >> k & 1) g.add_edge(u, v);
  return g;
}

/// All connected graphs on 1..max_n nodes up to isomorphism, by adding a
/// node adjacent to a nonempty subset of a smaller connected graph.
inline std::map<std::size_t, std::vector<Graph>> connected_catalogue(std::size_t max_n) {
  std::map<std::size_t, std::vector<Graph>> out;
  out[1] = {Graph(1)};
  for (std::size_t n = 2; n <= max_n; ++n) {
    std::set<std::uint64_t> seen;
    for (const auto& h : out[n - 1]) {
      for (std::uint64_t mask = 1; mask < (std::uint64_t{1} << (n - 1)); ++mask) {
        Graph g(n);
        for (auto [u, v] : h.edges()) g.add_edge(u, v);
        for (std::size_t u = 0; u + 1 < n; ++u)
          if (mask >> u & 1) g.add_edge(u, n - 1);
        if (seen.insert(canonical_form(g)).second) out[n].push_back(g);
      }
    }
  }
  return out;
}

/// Orbit counts by matching each 4-node induced subgraph against labelled
/// templates under all 24 relabellings.
inline std::vector<std::array<std::uint64_t, 11>> template_orbits(const Graph& g) {
  struct Template {
    std::vector<std::pair<int, int>> edges;
    std::array<int, 4> orbit;
  };
  const std::vector<Template> templates = {
      {{{0, 1}, {1, 2}, {2, 3}}, {4, 5, 5, 4}},
      {{{0, 1}, {0, 2}, {0, 3}}, {7, 6, 6, 6}},
      {{{0, 1}, {1, 2}, {2, 3}, {3, 0}}, {8, 8, 8, 8}},
      {{{0, 1}, {1, 2}, {2, 0}, {2, 3}}, {10, 10, 11, 9}},
      {{{0, 1}, {1, 2}, {2, 3}, {3, 0}, {0, 2}}, {13, 12, 13, 12}},
      {{{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}}, {14, 14, 14, 14}},
  };
  const std::size_t n = g.n();
  std::vector<std::array<std::uint64_t, 11>> out(n, std::array<std::uint64_t, 11>{});
  std::array<std::size_t, 4> s{};
  for (s[0] = 0; s[0] < n; ++s[0])
    for (s[1] = s[0] + 1; s[1] < n; ++s[1])
      for (s[2] = s[1] + 1; s[2] < n; ++s[2])
        for (s[3] = s[2] + 1; s[3] < n; ++s[3]) {
          for (const auto& t : templates) {
            std::array<int, 4> p{0, 1, 2, 3};
            bool matched = false;
            do {
              // template node i sits at subset position p[i]
              bool ok = true;
              for (int i = 0; i < 4 && ok; ++i)
                for (int j = i + 1; j < 4 && ok; ++j) {
                  const bool te = std::find(t.edges.begin(), t.edges.end(), std::pair{i, j}) != t.edges.end() ||
                                  std::find(t.edges.begin(), t.edges.end(), std::pair{j, i}) != t.edges.end();
                  ok = te == g.has_edge(s[p[i]], s[p[j]]);
                }
              if (ok) {
                for (int i = 0; i < 4; ++i) ++out[s[p[i]]][t.orbit[i] - 4];
                matched = true;
              }
            } while (!matched && std::next_permutation(p.begin(), p.end()));
            if (matched) break;
          }
        }
  return out;
}

inline Graph delete_node(const Graph& g, std::size_t x) {
  Graph h(g.n() - 1);
  auto idx = [&](std::size_t v) { return v < x ? v : v - 1; };
  for (auto [u, v] : g.edges())
    if (u != x && v != x) h.add_edge(idx(u), idx(v));
  return h;
}

/// Contracts edge (u, v) into u.
inline Graph contract(const Graph& g, std::size_t u, std::size_t v) {
  Graph h(g.n() - 1);
  auto idx = [&](std::size_t w) { return w == v ? (u < v ? u : u - 1) : (w < v ? w : w - 1); };
  for (auto [a, b] : g.edges()) {
    const auto x = idx(a), y = idx(b);
    if (x != y) h.add_edge(x, y);
  }
  return h;
}

/// Wagner's criterion by exhaustive minor search: g is non-planar iff
/// repeatedly deleting nodes or edges and contracting edges can reach K5 or
/// K3,3. Results are memoized on canonical forms (n <= 8).
inline bool planar_by_minors(const Graph& g) {
  static std::map<std::uint64_t, bool> memo;
  if (g.edge_count() < 9) return true;
  const auto key = canonical_form(g);
  if (auto it = memo.find(key); it != memo.end()) return it->second;
  Graph k5(5), k33(6);
  for (std::size_t a = 0; a < 5; ++a)
    for (std::size_t b = a + 1; b < 5; ++b) k5.add_edge(a, b);
  for (std::size_t a = 0; a < 3; ++a)
    for (std::size_t b = 3; b < 6; ++b) k33.add_edge(a, b);
  bool planar = key != canonical_form(k5) && key != canonical_form(k33);
  for (std::size_t x = 0; planar && x < g.n(); ++x) planar = planar_by_minors(delete_node(g, x));
  for (auto [u, v] : g.edges()) {
    if (!planar) break;
    Graph d = g;
    d.remove_edge(u, v);
    planar = planar_by_minors(d) && planar_by_minors(contract(g, u, v));
  }
  memo[key] = planar;
  return planar;
}

/// Whether `rounds` of colour refinement run on the disjoint union of a and b
/// give both graphs the same colour histogram after every round.
inline bool wl_equivalent(const Graph& a, const Graph& b, int rounds) {
  const std::size_t n = a.n() + b.n();
  if (a.n() != b.n()) return false;
  Graph u(n);
  for (auto [x, y] : a.edges()) u.add_edge(x, y);
  for (auto [x, y] : b.edges()) u.add_edge(a.n() + x, a.n() + y);
  std::vector<std::size_t> c(n, 0);
  for (int r = 0; r < rounds; ++r) {
    std::map<std::vector<std::size_t>, std::size_t> names;
    std::vector<std::vector<std::size_t>> sig(n);
    for (std::size_t v = 0; v < n; ++v) {
      sig[v].push_back(c[v]);
      std::vector<std::size_t> nb;
      for (std::size_t w = 0; w < n; ++w)
        if (u.has_edge(v, w)) nb.push_back(c[w]);
      std::sort(nb.begin(), nb.end());
      sig[v].insert(sig[v].end(), nb.begin(), nb.end());
      names.emplace(sig[v], 0);
    }
    std::size_t id = 0;
    for (auto& [k, v] : names) v = id++;
    for (std::size_t v = 0; v < n; ++v) c[v] = names[sig[v]];
    std::vector<std::size_t> ha(c.begin(), c.begin() + static_cast<long>(a.n())), hb(c.begin() + static_cast<long>(a.n()), c.end());
    std::sort(ha.begin(), ha.end());
    std::sort(hb.begin(), hb.end());
    if (ha != hb) return false;
  }
  return true;
}

}  // namespace sbgd::oracle
