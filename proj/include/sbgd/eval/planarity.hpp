#pragma once

#include <algorithm>
#include <functional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "../errors.hpp"
#include "../graph.hpp"

namespace sbgd::eval {

inline constexpr std::size_t kMaxPlanarityNodes = 24;

namespace planarity_detail {

using Edge = std::pair<std::size_t, std::size_t>;
using AdjList = std::vector<std::vector<std::size_t>>;

inline Edge key(std::size_t u, std::size_t v) { return u < v ? Edge{u, v} : Edge{v, u}; }

/// Edge sets of the biconnected components (Hopcroft-Tarjan).
inline std::vector<std::vector<Edge>> biconnected_components(const AdjList& adj) {
  const std::size_t n = adj.size();
  std::vector<int> disc(n, -1), low(n, 0);
  std::vector<Edge> stack;
  std::vector<std::vector<Edge>> out;
  int timer = 0;
  std::function<void(std::size_t, std::size_t)> dfs = [&](std::size_t v, std::size_t parent) {
    disc[v] = low[v] = timer++;
    for (auto u : adj[v]) {
      if (u == parent) continue;
      if (disc[u] < 0) {
        stack.push_back(key(v, u));
        dfs(u, v);
        low[v] = std::min(low[v], low[u]);
        if (low[u] >= disc[v]) {
          std::vector<Edge> comp;
          const Edge stop = key(v, u);
          while (true) {
            const Edge e = stack.back();
            stack.pop_back();
            comp.push_back(e);
            if (e == stop) break;
          }
          out.push_back(std::move(comp));
        }
      } else if (disc[u] < disc[v]) {
        stack.push_back(key(v, u));
        low[v] = std::min(low[v], disc[u]);
      }
    }
  };
  for (std::size_t v = 0; v < n; ++v)
    if (disc[v] < 0) dfs(v, n);
  return out;
}

/// Some cycle of a biconnected graph with at least 3 vertices, as a vertex list.
inline std::vector<std::size_t> find_cycle(const AdjList& adj, std::size_t start) {
  std::vector<int> parent(adj.size(), -1), depth(adj.size(), -1);
  std::vector<std::size_t> order{start};
  depth[start] = 0;
  std::function<std::vector<std::size_t>(std::size_t)> dfs = [&](std::size_t v) -> std::vector<std::size_t> {
    for (auto u : adj[v]) {
      if (depth[u] < 0) {
        depth[u] = depth[v] + 1;
        parent[u] = static_cast<int>(v);
        auto c = dfs(u);
        if (!c.empty()) return c;
      } else if (static_cast<int>(u) != parent[v] && depth[u] < depth[v]) {
        std::vector<std::size_t> cycle;
        for (std::size_t w = v; w != u; w = static_cast<std::size_t>(parent[w])) cycle.push_back(w);
        cycle.push_back(u);
        return cycle;
      }
    }
    return {};
  };
  return dfs(start);
}

struct Fragment {
  std::vector<std::size_t> attachments;  // embedded vertices it touches
  std::vector<std::size_t> inner;        // non-embedded vertices (empty for a chord)
  Edge chord{0, 0};
};

/// Embeds one biconnected component by the Demoucron-Malgrange-Pertuiset
/// face-insertion procedure. Returns false when some fragment fits in no face.
inline bool planar_biconnected(const AdjList& adj, const std::vector<std::size_t>& vertices) {
  const std::size_t n = adj.size();
  const auto cycle = find_cycle(adj, vertices.front());
  std::vector<char> embedded_v(n, 0);
  std::set<Edge> embedded_e;
  for (std::size_t i = 0; i < cycle.size(); ++i) {
    embedded_v[cycle[i]] = 1;
    embedded_e.insert(key(cycle[i], cycle[(i + 1) % cycle.size()]));
  }
  std::vector<std::vector<std::size_t>> faces{cycle, std::vector<std::size_t>(cycle.rbegin(), cycle.rend())};
  std::size_t total_edges = 0;
  for (auto v : vertices) total_edges += adj[v].size();
  total_edges /= 2;

  while (embedded_e.size() < total_edges) {
    // Collect fragments relative to the embedded subgraph.
    std::vector<Fragment> frags;
    for (auto v : vertices) {
      if (!embedded_v[v]) continue;
      for (auto u : adj[v])
        if (embedded_v[u] && v < u && !embedded_e.count(key(u, v))) {
          Fragment f;
          f.attachments = {v, u};
          f.chord = {v, u};
          frags.push_back(std::move(f));
        }
    }
    std::vector<int> comp(n, -1);
    for (auto s : vertices) {
      if (embedded_v[s] || comp[s] >= 0) continue;
      Fragment f;
      std::set<std::size_t> att;
      std::vector<std::size_t> st{s};
      comp[s] = static_cast<int>(frags.size());
      while (!st.empty()) {
        const auto v = st.back();
        st.pop_back();
        f.inner.push_back(v);
        for (auto u : adj[v]) {
          if (embedded_v[u]) att.insert(u);
          else if (comp[u] < 0) {
            comp[u] = comp[s];
            st.push_back(u);
          }
        }
      }
      f.attachments.assign(att.begin(), att.end());
      frags.push_back(std::move(f));
    }

    // Admissible faces: those containing every attachment.
    std::size_t pick = frags.size(), pick_face = 0, best = faces.size() + 1;
    for (std::size_t i = 0; i < frags.size(); ++i) {
      std::size_t count = 0, first = 0;
      for (std::size_t fi = 0; fi < faces.size(); ++fi) {
        const auto& face = faces[fi];
        const bool ok = std::all_of(frags[i].attachments.begin(), frags[i].attachments.end(), [&](std::size_t a) {
          return std::find(face.begin(), face.end(), a) != face.end();
        });
        if (ok && count++ == 0) first = fi;
      }
      if (count == 0) return false;
      if (count < best) {
        best = count;
        pick = i;
        pick_face = first;
      }
    }

    // A path through the chosen fragment between two distinct attachments.
    const Fragment& f = frags[pick];
    std::vector<std::size_t> path;
    if (f.inner.empty()) {
      path = {f.chord.first, f.chord.second};
    } else {
      const std::size_t a = f.attachments.front();
      std::vector<int> prev(n, -1);
      std::vector<char> seen(n, 0);
      std::vector<std::size_t> queue;
      for (auto u : adj[a])
        if (!embedded_v[u] && comp[u] == static_cast<int>(pick)) {
          seen[u] = 1;
          prev[u] = static_cast<int>(a);
          queue.push_back(u);
        }
      std::size_t end = n, via = n;
      for (std::size_t qi = 0; qi < queue.size() && end == n; ++qi) {
        const auto v = queue[qi];
        for (auto u : adj[v]) {
          if (embedded_v[u]) {
            if (u != a) {
              end = u;
              via = v;
              break;
            }
          } else if (!seen[u]) {
            seen[u] = 1;
            prev[u] = static_cast<int>(v);
            queue.push_back(u);
          }
        }
      }
      require(end != n, "planarity: fragment with a single attachment in a biconnected component");
      path.push_back(end);
      for (std::size_t w = via; w != a; w = static_cast<std::size_t>(prev[w])) path.push_back(w);
      path.push_back(a);
      std::reverse(path.begin(), path.end());
    }

    // Split the face along the path a = path.front() ... b = path.back().
    const auto face = faces[pick_face];
    const std::size_t a = path.front(), b = path.back();
    const std::size_t ia = static_cast<std::size_t>(std::find(face.begin(), face.end(), a) - face.begin());
    const std::size_t ib = static_cast<std::size_t>(std::find(face.begin(), face.end(), b) - face.begin());
    std::vector<std::size_t> f1, f2;
    for (std::size_t i = ia;; i = (i + 1) % face.size()) {
      f1.push_back(face[i]);
      if (i == ib) break;
    }
    for (std::size_t i = path.size() - 1; i-- > 1;) f1.push_back(path[i]);
    for (std::size_t i = ib;; i = (i + 1) % face.size()) {
      f2.push_back(face[i]);
      if (i == ia) break;
    }
    for (std::size_t i = 1; i + 1 < path.size(); ++i) f2.push_back(path[i]);
    faces[pick_face] = std::move(f1);
    faces.push_back(std::move(f2));
    for (std::size_t i = 0; i + 1 < path.size(); ++i) embedded_e.insert(key(path[i], path[i + 1]));
    for (auto v : path) embedded_v[v] = 1;
  }
  return true;
}

}  // namespace planarity_detail

/// Planarity test: the edge bound e <= 3n - 6, then a face-insertion
/// embedding of every biconnected component. Refuses graphs above
/// kMaxPlanarityNodes nodes.
inline bool is_planar(const Graph& g) {
  using namespace planarity_detail;
  const std::size_t n = g.n();
  if (n > kMaxPlanarityNodes)
    throw Refusal("planarity check refused: graph has " + std::to_string(n) + " nodes, limit is " +
                            std::to_string(kMaxPlanarityNodes));
  if (n >= 3 && g.edge_count() > 3 * n - 6) return false;
  const auto adj = g.adjacency_lists();
  for (const auto& comp : biconnected_components(adj)) {
    if (comp.size() < 9) continue;  // fewer than 9 edges cannot contain K5 or K3,3
    AdjList sub(n);
    std::set<std::size_t> vs;
    for (auto [u, v] : comp) {
      sub[u].push_back(v);
      sub[v].push_back(u);
      vs.insert(u);
      vs.insert(v);
    }
    if (comp.size() > 3 * vs.size() - 6) return false;
    if (!planar_biconnected(sub, std::vector<std::size_t>(vs.begin(), vs.end()))) return false;
  }
  return true;
}

}  // namespace sbgd::eval
