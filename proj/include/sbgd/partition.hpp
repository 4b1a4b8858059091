#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <queue>
#include <vector>

#include "errors.hpp"
#include "graph.hpp"
#include "linalg.hpp"
#include "rng.hpp"

namespace sbgd {

/// Graph with integer node and edge weights, used across coarsening levels.
struct WeightedGraph {
  std::vector<std::vector<std::pair<std::size_t, std::int64_t>>> adj;
  std::vector<std::int64_t> node_weight;

  std::size_t n() const { return node_weight.size(); }

  std::int64_t total_node_weight() const {
    return std::accumulate(node_weight.begin(), node_weight.end(), std::int64_t{0});
  }

  std::int64_t total_edge_weight() const {
    std::int64_t s = 0;
    for (std::size_t u = 0; u < adj.size(); ++u)
      for (auto [v, w] : adj[u])
        if (u < v) s += w;
    return s;
  }

  static WeightedGraph from(const Graph& g) {
    WeightedGraph wg;
    wg.adj.resize(g.n());
    wg.node_weight.assign(g.n(), 1);
    for (auto [u, v] : g.edges()) {
      wg.adj[u].push_back({v, 1});
      wg.adj[v].push_back({u, 1});
    }
    return wg;
  }
};

/// One step of heavy-edge-matching coarsening.
struct CoarseningLevel {
  WeightedGraph coarse;
  std::vector<std::size_t> fine_to_coarse;
  std::size_t matched_pairs = 0;
};

struct PartitionOptions {
  std::size_t k = 2;
  double balance_eps = 0.1;
  std::uint64_t seed = 0;
  int trials = 4;  // minimum independent multilevel runs; the lowest cut wins
};

/// Per-pass cut values recorded by Kernighan-Lin refinement, for auditing.
struct RefinementTrace {
  std::vector<std::int64_t> pass_start_cut;
  std::vector<std::int64_t> pass_end_cut;
};

namespace partition_detail {

inline std::int64_t weighted_cut(const WeightedGraph& g, const std::vector<std::size_t>& part) {
  std::int64_t cut = 0;
  for (std::size_t u = 0; u < g.n(); ++u)
    for (auto [v, w] : g.adj[u])
      if (u < v && part[u] != part[v]) cut += w;
  return cut;
}

inline std::int64_t max_allowed(std::int64_t total, std::size_t k, double eps) {
  const double bound = (1.0 + eps) * static_cast<double>(total) / static_cast<double>(k);
  return static_cast<std::int64_t>(std::ceil(bound - 1e-9));
}

}  // namespace partition_detail

/// Heavy-edge matching: visit nodes in seeded random order, match each
/// unmatched node to the unmatched neighbour joined by the heaviest edge
/// (random tie-break), then contract matched pairs.
inline CoarseningLevel coarsen_once(const WeightedGraph& g, Rng& rng, std::int64_t max_node_weight) {
  const std::size_t n = g.n();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);

  constexpr std::size_t none = std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> mate(n, none);
  CoarseningLevel level;
  for (auto u : order) {
    if (mate[u] != none) continue;
    std::size_t best = none;
    std::int64_t best_w = 0;
    std::uint64_t ties = 0;
    for (auto [v, w] : g.adj[u]) {
      if (mate[v] != none || v == u) continue;
      if (g.node_weight[u] + g.node_weight[v] > max_node_weight) continue;
      if (w > best_w) {
        best = v;
        best_w = w;
        ties = 1;
      } else if (w == best_w && best != none) {
        ++ties;
        if (rng.below(ties) == 0) best = v;
      }
    }
    if (best != none) {
      mate[u] = best;
      mate[best] = u;
      ++level.matched_pairs;
    } else {
      mate[u] = u;
    }
  }

  level.fine_to_coarse.assign(n, none);
  std::size_t next = 0;
  for (std::size_t u = 0; u < n; ++u) {
    if (level.fine_to_coarse[u] != none) continue;
    level.fine_to_coarse[u] = next;
    level.fine_to_coarse[mate[u]] = next;
    ++next;
  }
  auto& c = level.coarse;
  c.node_weight.assign(next, 0);
  c.adj.resize(next);
  for (std::size_t u = 0; u < n; ++u) c.node_weight[level.fine_to_coarse[u]] += g.node_weight[u];
  std::vector<std::map<std::size_t, std::int64_t>> acc(next);
  for (std::size_t u = 0; u < n; ++u) {
    const auto cu = level.fine_to_coarse[u];
    for (auto [v, w] : g.adj[u]) {
      const auto cv = level.fine_to_coarse[v];
      if (cu != cv) acc[cu][cv] += w;
    }
  }
  for (std::size_t cu = 0; cu < next; ++cu)
    for (auto [cv, w] : acc[cu]) c.adj[cu].push_back({cv, w});
  return level;
}

/// Greedy region growing from k spread-out seeds. The lightest block grows
/// next, absorbing the unassigned frontier node most strongly tied to it.
inline std::vector<std::size_t> grow_regions(const WeightedGraph& g, std::size_t k, Rng& rng) {
  const std::size_t n = g.n();
  constexpr std::size_t none = std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> part(n, none);
  std::vector<std::int64_t> weight(k, 0);

  // seeds: first random, then repeatedly the node farthest (in hops) from all
  // chosen seeds; unreachable nodes count as infinitely far
  std::vector<std::size_t> seeds{static_cast<std::size_t>(rng.below(n))};
  while (seeds.size() < k) {
    std::vector<std::size_t> dist(n, none);
    std::queue<std::size_t> q;
    for (auto s : seeds) {
      dist[s] = 0;
      q.push(s);
    }
    while (!q.empty()) {
      const auto u = q.front();
      q.pop();
      for (auto [v, w] : g.adj[u])
        if (dist[v] == none) {
          dist[v] = dist[u] + 1;
          q.push(v);
        }
    }
    std::size_t pick = none;
    for (std::size_t v = 0; v < n; ++v) {
      if (std::find(seeds.begin(), seeds.end(), v) != seeds.end()) continue;
      if (pick == none || dist[v] > dist[pick]) pick = v;
    }
    seeds.push_back(pick);
  }
  for (std::size_t b = 0; b < k; ++b) {
    part[seeds[b]] = b;
    weight[b] += g.node_weight[seeds[b]];
  }

  std::vector<std::vector<std::int64_t>> tie(k, std::vector<std::int64_t>(n, 0));
  for (std::size_t b = 0; b < k; ++b)
    for (auto [v, w] : g.adj[seeds[b]]) tie[b][v] += w;

  std::size_t assigned = k;
  while (assigned < n) {
    std::size_t b = 0;
    for (std::size_t c = 1; c < k; ++c)
      if (weight[c] < weight[b]) b = c;
    std::size_t pick = none;
    for (std::size_t v = 0; v < n; ++v)
      if (part[v] == none && tie[b][v] > 0 && (pick == none || tie[b][v] > tie[b][pick])) pick = v;
    if (pick == none) {
      // frontier exhausted (disconnected graph): take any unassigned node
      for (std::size_t v = 0; v < n && pick == none; ++v)
        if (part[v] == none) pick = v;
    }
    part[pick] = b;
    weight[b] += g.node_weight[pick];
    for (auto [v, w] : g.adj[pick]) tie[b][v] += w;
    ++assigned;
  }
  return part;
}

/// Moves nodes until every block is nonempty and within `max_weight`,
/// choosing at each step the admissible move that loses the least cut.
inline void enforce_balance(const WeightedGraph& g, std::vector<std::size_t>& part, std::size_t k,
                            std::int64_t max_weight) {
  const std::size_t n = g.n();
  for (std::size_t guard = 0; guard < 4 * n + 4; ++guard) {
    std::vector<std::int64_t> weight(k, 0);
    for (std::size_t v = 0; v < n; ++v) weight[part[v]] += g.node_weight[v];
    std::size_t from = k, to = k;
    for (std::size_t b = 0; b < k; ++b)
      if (weight[b] == 0) to = b;
    if (to != k) {
      from = static_cast<std::size_t>(std::max_element(weight.begin(), weight.end()) - weight.begin());
    } else {
      for (std::size_t b = 0; b < k; ++b)
        if (weight[b] > max_weight) from = b;
      if (from == k) return;
    }
    // best node of `from` to move to `to` (or to the lightest block able to take it)
    std::int64_t best_gain = std::numeric_limits<std::int64_t>::min();
    std::size_t best_v = n, best_to = k;
    for (std::size_t v = 0; v < n; ++v) {
      if (part[v] != from) continue;
      std::vector<std::int64_t> conn(k, 0);
      for (auto [u, w] : g.adj[v]) conn[part[u]] += w;
      for (std::size_t b = 0; b < k; ++b) {
        if (b == from) continue;
        if (to != k && b != to) continue;
        if (to == k && weight[b] + g.node_weight[v] > max_weight) continue;
        const std::int64_t gain = conn[b] - conn[from];
        if (gain > best_gain) {
          best_gain = gain;
          best_v = v;
          best_to = b;
        }
      }
    }
    if (best_v == n) {
      // nothing fits under the bound; move the lightest node to the lightest block
      const auto lightest = static_cast<std::size_t>(std::min_element(weight.begin(), weight.end()) - weight.begin());
      for (std::size_t v = 0; v < n; ++v)
        if (part[v] == from && (best_v == n || g.node_weight[v] < g.node_weight[best_v])) best_v = v;
      best_to = lightest;
    }
    part[best_v] = best_to;
  }
}

/// Boundary Kernighan-Lin refinement with single-node moves and pair swaps.
///
/// Each pass tentatively applies the best admissible move or swap (even with
/// negative gain), locking the nodes involved, and finally rolls back to the
/// best prefix. Passes therefore never increase the cut; refinement stops
/// after a pass without improvement. `max_weight` bounds block weights;
/// moves never empty a block.
inline std::int64_t kl_refine(const WeightedGraph& g, std::vector<std::size_t>& part, std::size_t k,
                              std::int64_t max_weight, RefinementTrace* trace = nullptr,
                              int max_passes = 32) {
  const std::size_t n = g.n();
  if (k < 2 || n < 2) return partition_detail::weighted_cut(g, part);
  std::int64_t cut = partition_detail::weighted_cut(g, part);

  for (int pass = 0; pass < max_passes; ++pass) {
    const std::int64_t start_cut = cut;
    std::vector<std::int64_t> weight(k, 0);
    for (std::size_t v = 0; v < n; ++v) weight[part[v]] += g.node_weight[v];
    std::vector<std::vector<std::int64_t>> conn(n, std::vector<std::int64_t>(k, 0));
    for (std::size_t v = 0; v < n; ++v)
      for (auto [u, w] : g.adj[v]) conn[v][part[u]] += w;
    auto edge_w = [&](std::size_t a, std::size_t b) {
      for (auto [u, w] : g.adj[a])
        if (u == b) return w;
      return std::int64_t{0};
    };

    std::vector<char> locked(n, 0);
    struct Step {
      std::size_t v;
      std::size_t from;
    };
    std::vector<Step> history;
    std::int64_t best_cut = cut;
    std::size_t best_len = 0;
    std::size_t since_best = 0;

    auto apply_move = [&](std::size_t v, std::size_t to) {
      const std::size_t from = part[v];
      cut -= conn[v][to] - conn[v][from];
      weight[from] -= g.node_weight[v];
      weight[to] += g.node_weight[v];
      for (auto [u, w] : g.adj[v]) {
        conn[u][from] -= w;
        conn[u][to] += w;
      }
      part[v] = to;
      history.push_back({v, from});
    };

    while (true) {
      std::vector<std::size_t> boundary;
      for (std::size_t v = 0; v < n; ++v) {
        if (locked[v]) continue;
        if (conn[v][part[v]] < std::accumulate(conn[v].begin(), conn[v].end(), std::int64_t{0})) boundary.push_back(v);
      }
      if (boundary.empty()) break;

      std::int64_t best_gain = std::numeric_limits<std::int64_t>::min();
      std::size_t mv = n, mv_to = k, sw = n;
      for (auto v : boundary) {
        const std::size_t a = part[v];
        for (std::size_t b = 0; b < k; ++b) {
          if (b == a || conn[v][b] == 0) continue;
          if (weight[b] + g.node_weight[v] > max_weight) continue;
          if (weight[a] - g.node_weight[v] <= 0) continue;
          const std::int64_t gain = conn[v][b] - conn[v][a];
          if (gain > best_gain) {
            best_gain = gain;
            mv = v;
            mv_to = b;
            sw = n;
          }
        }
      }
      // Swap partners need not lie on the boundary: exchanging a boundary
      // node with an interior or isolated node is how full blocks trade.
      for (auto u : boundary) {
        for (std::size_t v = 0; v < n; ++v) {
          if (locked[v] || v == u) continue;
          const std::size_t a = part[u], b = part[v];
          if (a == b || (conn[u][b] == 0 && conn[v][a] == 0)) continue;
          if (weight[a] - g.node_weight[u] + g.node_weight[v] > max_weight) continue;
          if (weight[b] - g.node_weight[v] + g.node_weight[u] > max_weight) continue;
          const std::int64_t gain =
              (conn[u][b] - conn[u][a]) + (conn[v][a] - conn[v][b]) - 2 * edge_w(u, v);
          if (gain > best_gain) {
            best_gain = gain;
            mv = u;
            mv_to = b;
            sw = v;
          }
        }
      }
      if (mv == n) break;
      const std::size_t other_block = part[mv];
      apply_move(mv, mv_to);
      locked[mv] = 1;
      if (sw != n) {
        apply_move(sw, other_block);
        locked[sw] = 1;
      }
      if (cut < best_cut) {
        best_cut = cut;
        best_len = history.size();
        since_best = 0;
      } else if (++since_best > 2 * n / k + 8) {
        break;
      }
    }
    while (history.size() > best_len) {
      const auto step = history.back();
      history.pop_back();
      const std::size_t cur = part[step.v];
      cut -= conn[step.v][step.from] - conn[step.v][cur];
      for (auto [u, w] : g.adj[step.v]) {
        conn[u][cur] -= w;
        conn[u][step.from] += w;
      }
      part[step.v] = step.from;
    }
    if (trace) {
      trace->pass_start_cut.push_back(start_cut);
      trace->pass_end_cut.push_back(cut);
    }
    if (cut >= start_cut) break;
  }
  return cut;
}

/// Balanced k-way partition minimizing edge cut (multilevel scheme).
///
/// Coarsens by heavy-edge matching until at most max(4k, 32) nodes remain or
/// matching stalls, grows k regions on the coarsest graph, then projects back
/// level by level with Kernighan-Lin refinement. Deterministic for a seed.
inline Partition partition_graph(const Graph& g, const PartitionOptions& opt,
                                 RefinementTrace* trace = nullptr) {
  const std::size_t n = g.n();
  if (opt.k < 1 || opt.k > n) {
    throw ContractViolation("partition_graph: need 1 <= k <= n, got k=" + std::to_string(opt.k) +
                            " n=" + std::to_string(n));
  }
  require(opt.balance_eps >= 0.0, "partition_graph: balance_eps must be nonnegative");
  Partition best;
  best.k = opt.k;
  best.balance_eps = opt.balance_eps;
  if (opt.k == 1) {
    best.assignment.assign(n, 0);
    return best;
  }

  const WeightedGraph fine = WeightedGraph::from(g);
  const std::int64_t total = fine.total_node_weight();
  const std::int64_t max_weight = partition_detail::max_allowed(total, opt.k, opt.balance_eps);
  const std::size_t coarse_target = std::max<std::size_t>(4 * opt.k, 32);

  Rng master(opt.seed);
  std::int64_t best_cut = std::numeric_limits<std::int64_t>::max();
  // Small graphs get extra restarts so the total work stays roughly constant.
  const int trials = std::max({1, opt.trials, static_cast<int>(512 / std::max<std::size_t>(n, 1))});
  for (int trial = 0; trial < trials; ++trial) {
    Rng rng = master.split(static_cast<std::uint64_t>(trial));
    std::vector<CoarseningLevel> levels;
    const WeightedGraph* cur = &fine;
    while (cur->n() > coarse_target) {
      auto level = coarsen_once(*cur, rng, max_weight);
      if (level.matched_pairs == 0) break;
      levels.push_back(std::move(level));
      cur = &levels.back().coarse;
    }
    std::vector<std::size_t> part = grow_regions(*cur, opt.k, rng);
    RefinementTrace local;
    for (std::size_t li = levels.size(); li-- > 0;) {
      const WeightedGraph& coarse = levels[li].coarse;
      std::int64_t level_max = 0;
      {
        std::vector<std::int64_t> w(opt.k, 0);
        for (std::size_t v = 0; v < coarse.n(); ++v) w[part[v]] += coarse.node_weight[v];
        level_max = std::max(max_weight, *std::max_element(w.begin(), w.end()));
      }
      kl_refine(coarse, part, opt.k, level_max, nullptr);
      const auto& map = levels[li].fine_to_coarse;
      std::vector<std::size_t> finer(map.size());
      for (std::size_t v = 0; v < map.size(); ++v) finer[v] = part[map[v]];
      part = std::move(finer);
    }
    enforce_balance(fine, part, opt.k, max_weight);
    const std::int64_t c = kl_refine(fine, part, opt.k, max_weight, &local);
    if (c < best_cut) {
      best_cut = c;
      best.assignment = part;
      if (trace) *trace = local;
    }
  }
  best.validate(n);
  return best;
}

/// Number of blocks for a target block size, k = round(n / C) clamped to [1, n].
inline std::size_t block_count_for(std::size_t n, std::size_t target_block_size) {
  require(target_block_size >= 1, "block_count_for: target block size must be positive");
  const auto k = static_cast<std::size_t>(std::llround(static_cast<double>(n) / static_cast<double>(target_block_size)));
  return std::clamp<std::size_t>(k, 1, std::max<std::size_t>(n, 1));
}

/// Two-way split by the sign pattern of the Fiedler vector.
///
/// The Fiedler vector (eigenvector of the second-smallest eigenvalue of the
/// combinatorial Laplacian L) is found by inverse iteration on L + 11^T/n with
/// the constant direction projected out, until ||Lx - (x^T L x) x|| < 1e-8.
/// Falls back to a median split when the sign classes are out of balance.
/// Block 0 always contains node 0.
inline Partition spectral_bisect(const Graph& g, std::uint64_t seed, double balance_eps = 0.1,
                                 std::vector<double>* fiedler_out = nullptr) {
  const std::size_t n = g.n();
  require(n >= 2, "spectral_bisect: need at least 2 nodes");
  if (!is_connected(g)) {
    throw ContractViolation(
        "spectral_bisect: graph is disconnected; bisect each connected component separately");
  }
  linalg::Matrix lap(n);
  for (std::size_t u = 0; u < n; ++u) {
    lap(u, u) = static_cast<double>(g.degree(u));
    for (std::size_t v = 0; v < n; ++v)
      if (g.has_edge(u, v)) lap(u, v) = -1.0;
  }
  linalg::Matrix shifted = lap;
  for (auto& x : shifted.a) x += 1.0 / static_cast<double>(n);
  const auto chol = linalg::cholesky(shifted);

  auto project_normalize = [n](std::vector<double>& x) {
    const double m = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(n);
    double norm = 0.0;
    for (auto& v : x) {
      v -= m;
      norm += v * v;
    }
    norm = std::sqrt(norm);
    if (norm == 0.0) throw NumericFault("spectral_bisect: iterate collapsed to zero");
    for (auto& v : x) v /= norm;
  };

  Rng rng(seed);
  std::vector<double> x(n);
  for (auto& v : x) v = rng.normal();
  project_normalize(x);
  bool converged = false;
  for (int it = 0; it < 20000; ++it) {
    x = linalg::cholesky_solve(chol, x);
    project_normalize(x);
    std::vector<double> lx(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) lx[i] += lap(i, j) * x[j];
    double rayleigh = 0.0;
    for (std::size_t i = 0; i < n; ++i) rayleigh += x[i] * lx[i];
    double res = 0.0;
    for (std::size_t i = 0; i < n; ++i) res += (lx[i] - rayleigh * x[i]) * (lx[i] - rayleigh * x[i]);
    if (std::sqrt(res) < 1e-8) {
      converged = true;
      break;
    }
  }
  if (!converged) throw NumericFault("spectral_bisect: inverse iteration did not reach residual 1e-8");

  Partition p;
  p.k = 2;
  p.balance_eps = balance_eps;
  p.assignment.assign(n, 0);
  for (std::size_t v = 0; v < n; ++v) p.assignment[v] = x[v] > 0.0 ? 1 : 0;
  if (!p.is_balanced()) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
    for (std::size_t r = 0; r < n; ++r) p.assignment[order[r]] = r < n / 2 ? 0 : 1;
  }
  if (p.assignment[0] != 0)
    for (auto& b : p.assignment) b = 1 - b;
  if (fiedler_out) *fiedler_out = x;
  return p;
}

/// Exact minimum balanced cut by exhaustive enumeration (n <= 14).
inline std::size_t brute_force_min_cut(const Graph& g, std::size_t k, double balance_eps) {
  const std::size_t n = g.n();
  if (n > 14) throw Refusal("brute_force_min_cut: n=" + std::to_string(n) + " exceeds the enumeration bound 14");
  require(k >= 1 && k <= n, "brute_force_min_cut: need 1 <= k <= n");
  Partition shape;
  shape.k = k;
  shape.balance_eps = balance_eps;
  shape.assignment.assign(n, 0);
  const std::size_t cap = shape.max_block_size();
  const auto edges = g.edges();

  std::size_t best = std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> assign(n, 0), sizes(k, 0);
  // blocks are opened in order (canonical labelling) to skip relabelled duplicates
  auto rec = [&](auto&& self, std::size_t v, std::size_t used) -> void {
    if (v == n) {
      if (used != k) return;
      std::size_t cut = 0;
      for (auto [a, b] : edges) cut += assign[a] != assign[b];
      best = std::min(best, cut);
      return;
    }
    if (k - used > n - v) return;  // cannot open the remaining blocks
    for (std::size_t b = 0; b < std::min(used + 1, k); ++b) {
      if (sizes[b] + 1 > cap) continue;
      assign[v] = b;
      ++sizes[b];
      self(self, v + 1, std::max(used, b + 1));
      --sizes[b];
    }
  };
  rec(rec, 0, 0);
  if (best == std::numeric_limits<std::size_t>::max())
    throw ContractViolation("brute_force_min_cut: no balanced partition exists");
  return best;
}

}  // namespace sbgd
