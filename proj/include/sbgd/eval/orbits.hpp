#pragma once

#include <array>
#include <string>
#include <vector>

#include "../errors.hpp"
#include "../graph.hpp"

namespace sbgd::eval {

/// Largest graph accepted by the exhaustive 4-node enumeration.
inline constexpr std::size_t kMaxOrbitNodes = 200;

/// The 11 node orbits of connected 4-node graphlets, numbered 4..14:
///   path P4: 4 end, 5 middle          star K1,3: 6 leaf, 7 centre
///   cycle C4: 8                       paw: 9 pendant, 10 triangle degree 2, 11 degree 3
///   diamond: 12 degree 2, 13 degree 3 clique K4: 14
inline constexpr std::size_t kOrbitCount = 11;
inline constexpr std::size_t kFirstOrbit = 4;

/// Graphlet index 0..5 (P4, star, C4, paw, diamond, K4) of a connected
/// 4-node graph, and the orbit of each of its nodes, or -1 if disconnected.
struct GraphletClass {
  int graphlet = -1;
  std::array<int, 4> orbit{-1, -1, -1, -1};
};

inline GraphletClass classify_quad(const std::array<std::array<bool, 4>, 4>& adj) {
  std::array<int, 4> deg{};
  int edges = 0;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j)
      if (i != j && adj[i][j]) ++deg[i];
  for (int d : deg) edges += d;
  edges /= 2;
  GraphletClass c;
  int ones = 0, threes = 0;
  for (int d : deg) {
    if (d == 0) return c;
    ones += d == 1;
    threes += d == 3;
  }
  switch (edges) {
    case 3:
      if (threes == 1) {
        c.graphlet = 1;
        for (int i = 0; i < 4; ++i) c.orbit[i] = deg[i] == 3 ? 7 : 6;
      } else {
        c.graphlet = 0;
        for (int i = 0; i < 4; ++i) c.orbit[i] = deg[i] == 1 ? 4 : 5;
      }
      return c;
    case 4:
      if (ones == 0) {
        c.graphlet = 2;
        c.orbit.fill(8);
      } else {
        c.graphlet = 3;
        for (int i = 0; i < 4; ++i) c.orbit[i] = deg[i] == 1 ? 9 : deg[i] == 2 ? 10 : 11;
      }
      return c;
    case 5:
      c.graphlet = 4;
      for (int i = 0; i < 4; ++i) c.orbit[i] = deg[i] == 2 ? 12 : 13;
      return c;
    case 6:
      c.graphlet = 5;
      c.orbit.fill(14);
      return c;
    default:
      return c;
  }
}

/// Per-node orbit counts: n rows of kOrbitCount entries (orbit 4 first),
/// from every 4-node induced subgraph.
inline std::vector<std::array<std::uint64_t, kOrbitCount>> node_orbit_counts(const Graph& g) {
  const std::size_t n = g.n();
  if (n > kMaxOrbitNodes)
    throw Refusal("orbit counting refused: graph has " + std::to_string(n) + " nodes, limit is " +
                            std::to_string(kMaxOrbitNodes));
  std::vector<std::array<std::uint64_t, kOrbitCount>> out(n, std::array<std::uint64_t, kOrbitCount>{});
  const auto& a = g.adjacency();
  std::array<std::size_t, 4> v{};
  std::array<std::array<bool, 4>, 4> sub{};
  for (v[0] = 0; v[0] < n; ++v[0])
    for (v[1] = v[0] + 1; v[1] < n; ++v[1])
      for (v[2] = v[1] + 1; v[2] < n; ++v[2]) {
        const bool e01 = a[v[0] * n + v[1]], e02 = a[v[0] * n + v[2]], e12 = a[v[1] * n + v[2]];
        for (v[3] = v[2] + 1; v[3] < n; ++v[3]) {
          const bool e03 = a[v[0] * n + v[3]], e13 = a[v[1] * n + v[3]], e23 = a[v[2] * n + v[3]];
          if (static_cast<int>(e01) + e02 + e12 + e03 + e13 + e23 < 3) continue;
          sub = {{{false, e01, e02, e03}, {e01, false, e12, e13}, {e02, e12, false, e23}, {e03, e13, e23, false}}};
          const auto c = classify_quad(sub);
          if (c.graphlet < 0) continue;
          for (int i = 0; i < 4; ++i) ++out[v[i]][c.orbit[i] - kFirstOrbit];
        }
      }
  return out;
}

/// Orbit totals over all nodes.
inline std::array<std::uint64_t, kOrbitCount> orbit_totals(const Graph& g) {
  std::array<std::uint64_t, kOrbitCount> t{};
  for (const auto& row : node_orbit_counts(g))
    for (std::size_t k = 0; k < kOrbitCount; ++k) t[k] += row[k];
  return t;
}

/// Number of induced copies of each graphlet (P4, star, C4, paw, diamond, K4).
inline std::array<std::uint64_t, 6> graphlet_counts(const Graph& g) {
  const auto t = orbit_totals(g);
  auto at = [&](std::size_t orbit) { return t[orbit - kFirstOrbit]; };
  return {at(4) / 2, at(7), at(8) / 4, at(11), at(13) / 2, at(14) / 4};
}

}  // namespace sbgd::eval
