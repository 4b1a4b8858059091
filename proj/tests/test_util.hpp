#pragma once

#include <numeric>
#include <vector>

#include "sbgd/diffusion.hpp"
#include "sbgd/graph.hpp"
#include "sbgd/rng.hpp"

namespace sbgd::testing {

inline std::vector<std::size_t> random_permutation(std::size_t n, Rng& rng) {
  std::vector<std::size_t> p(n);
  std::iota(p.begin(), p.end(), 0);
  for (std::size_t i = n; i-- > 1;) std::swap(p[i], p[rng.below(i + 1)]);
  return p;
}

/// State with node v moved to position perm[v].
inline AnalogGraphState permute_state(const AnalogGraphState& s, const std::vector<std::size_t>& perm) {
  AnalogGraphState out(s.n, s.feature_dim);
  out.t = s.t;
  for (std::size_t u = 0; u < s.n; ++u) {
    for (std::size_t v = 0; v < s.n; ++v) out.a[perm[u] * s.n + perm[v]] = s.a[u * s.n + v];
    for (std::size_t k = 0; k < s.feature_dim; ++k) out.x[perm[u] * s.feature_dim + k] = s.x[u * s.feature_dim + k];
  }
  return out;
}

inline Partition random_partition(std::size_t n, std::size_t k, Rng& rng) {
  Partition p;
  p.k = k;
  p.assignment.resize(n);
  for (std::size_t v = 0; v < n; ++v) p.assignment[v] = v % k;
  for (std::size_t v = n; v-- > 1;) std::swap(p.assignment[v], p.assignment[rng.below(v + 1)]);
  return p;
}

inline Graph with_features(Graph g, std::size_t f, Rng& rng) {
  Graph out(g.n(), f);
  for (auto [u, v] : g.edges()) out.add_edge(u, v);
  for (std::size_t v = 0; v < g.n(); ++v)
    for (std::size_t c = 0; c < f; ++c) out.feature(v, c) = rng.normal();
  return out;
}

}  // namespace sbgd::testing
