#pragma once

#include <algorithm>
#include <cstdint>
#include <vector>

#include "../graph.hpp"

namespace sbgd::eval {

inline std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t hash_sequence(std::uint64_t seed, const std::vector<std::uint64_t>& xs) {
  std::uint64_t h = splitmix(seed ^ xs.size());
  for (auto x : xs) h = splitmix(h ^ x);
  return h;
}

/// Node colours after each of `iterations` rounds of 1-WL refinement from a
/// uniform start; entry r holds the colours after round r (entry 0 is the
/// start).
inline std::vector<std::vector<std::uint64_t>> wl_colours(const Graph& g, int iterations = 3) {
  const auto nbrs = g.adjacency_lists();
  std::vector<std::vector<std::uint64_t>> rounds{std::vector<std::uint64_t>(g.n(), splitmix(1))};
  std::vector<std::uint64_t> ms;
  for (int r = 0; r < iterations; ++r) {
    const auto& c = rounds.back();
    std::vector<std::uint64_t> next(g.n());
    for (std::size_t v = 0; v < g.n(); ++v) {
      ms.clear();
      for (auto u : nbrs[v]) ms.push_back(c[u]);
      std::sort(ms.begin(), ms.end());
      next[v] = hash_sequence(c[v], ms);
    }
    rounds.push_back(std::move(next));
  }
  return rounds;
}

/// Graph hash from the colour multisets of every round. Isomorphic graphs
/// always collide; non-isomorphic graphs collide only if 3 rounds of WL do
/// not separate them (or on a 64-bit hash collision).
inline std::uint64_t wl_hash(const Graph& g, int iterations = 3) {
  std::uint64_t h = splitmix(g.n());
  for (auto c : wl_colours(g, iterations)) {
    std::sort(c.begin(), c.end());
    h = splitmix(h ^ hash_sequence(0x5bd1e995, c));
  }
  return h;
}

}  // namespace sbgd::eval
