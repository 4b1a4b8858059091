#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "graph.hpp"
#include "rng.hpp"

namespace sbgd {

/// Contextual stochastic block model parameters.
struct CsbmSpec {
  std::size_t n = 32;
  std::size_t communities = 2;
  double p_in = 0.5;
  double p_out = 0.05;
  std::size_t feature_dim = 4;
  double mu = 16.0;              // feature signal strength
  std::uint64_t seed = 0;        // structure and per-node noise
  std::uint64_t mean_seed = 0;   // community mean directions, shared across a dataset

  void validate() const {
    require(communities >= 1, "CsbmSpec: communities must be >= 1");
    require(communities <= n, "CsbmSpec: more communities than nodes");
    require(p_in >= 0.0 && p_in <= 1.0, "CsbmSpec: p_in must lie in [0, 1]");
    require(p_out >= 0.0 && p_out <= 1.0, "CsbmSpec: p_out must lie in [0, 1]");
    require(p_out <= p_in, "CsbmSpec: p_out must not exceed p_in");
    require(mu >= 0.0, "CsbmSpec: mu must be nonnegative");
  }
};

/// Community of node v when n nodes are split evenly into `communities`
/// contiguous groups.
inline std::size_t csbm_community(std::size_t v, std::size_t n, std::size_t communities) {
  return v * communities / n;
}

/// Unit-norm community mean directions drawn from `mean_seed`.
inline std::vector<std::vector<double>> csbm_means(std::size_t communities, std::size_t feature_dim,
                                                   std::uint64_t mean_seed) {
  Rng rng(mean_seed ^ 0x6a09e667f3bcc909ULL);
  std::vector<std::vector<double>> means(communities, std::vector<double>(feature_dim));
  for (auto& m : means) {
    double norm = 0.0;
    for (auto& x : m) {
      x = rng.normal();
      norm += x * x;
    }
    norm = std::sqrt(norm);
    for (auto& x : m) x = norm > 0 ? x / norm : 0.0;
  }
  return means;
}

/// Samples a cSBM graph: edges independent with p_in inside a community and
/// p_out across; features x_v = sqrt(mu/n) m_{c(v)} + z_v / sqrt(F) with z_v
/// standard Gaussian.
inline Graph gen_csbm(const CsbmSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  Graph g(spec.n, spec.feature_dim);
  for (std::size_t u = 0; u < spec.n; ++u) {
    const auto cu = csbm_community(u, spec.n, spec.communities);
    for (std::size_t v = u + 1; v < spec.n; ++v) {
      const auto cv = csbm_community(v, spec.n, spec.communities);
      if (rng.bernoulli(cu == cv ? spec.p_in : spec.p_out)) g.add_edge(u, v);
    }
  }
  if (spec.feature_dim > 0) {
    const auto means = csbm_means(spec.communities, spec.feature_dim, spec.mean_seed);
    const double signal = std::sqrt(spec.mu / static_cast<double>(spec.n));
    const double noise = 1.0 / std::sqrt(static_cast<double>(spec.feature_dim));
    for (std::size_t v = 0; v < spec.n; ++v) {
      const auto& m = means[csbm_community(v, spec.n, spec.communities)];
      for (std::size_t k = 0; k < spec.feature_dim; ++k) g.feature(v, k) = signal * m[k] + noise * rng.normal();
    }
  }
  return g;
}

/// Erdos-Renyi G(n, p) without features.
inline Graph gen_er(std::size_t n, double p, std::uint64_t seed) {
  require(p >= 0.0 && p <= 1.0, "gen_er: p must lie in [0, 1]");
  Rng rng(seed);
  Graph g(n, 0);
  for (std::size_t u = 0; u < n; ++u)
    for (std::size_t v = u + 1; v < n; ++v)
      if (rng.bernoulli(p)) g.add_edge(u, v);
  return g;
}

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

/// Delaunay triangulation of a 2-D point set by incremental Bowyer-Watson
/// insertion inside a bounding super-triangle. Returns triangles as index
/// triples into `points`.
inline std::vector<std::array<std::size_t, 3>> bowyer_watson(const std::vector<Point2>& points) {
  struct Tri {
    std::array<std::size_t, 3> v;
    double cx, cy, r2;
  };
  std::vector<Point2> pts = points;
  double minx = 0, miny = 0, maxx = 1, maxy = 1;
  if (!points.empty()) {
    minx = maxx = points[0].x;
    miny = maxy = points[0].y;
    for (const auto& p : points) {
      minx = std::min(minx, p.x);
      maxx = std::max(maxx, p.x);
      miny = std::min(miny, p.y);
      maxy = std::max(maxy, p.y);
    }
  }
  const double span = std::max({maxx - minx, maxy - miny, 1e-9});
  const double midx = 0.5 * (minx + maxx), midy = 0.5 * (miny + maxy);
  const std::size_t s0 = pts.size();
  pts.push_back({midx - 50 * span, midy - 30 * span});
  pts.push_back({midx + 50 * span, midy - 30 * span});
  pts.push_back({midx, midy + 50 * span});

  auto make = [&](std::size_t a, std::size_t b, std::size_t c) {
    const Point2 &A = pts[a], &B = pts[b], &C = pts[c];
    const double d = 2.0 * (A.x * (B.y - C.y) + B.x * (C.y - A.y) + C.x * (A.y - B.y));
    const double a2 = A.x * A.x + A.y * A.y, b2 = B.x * B.x + B.y * B.y, c2 = C.x * C.x + C.y * C.y;
    Tri t{{a, b, c}, 0, 0, 0};
    if (std::abs(d) < 1e-300) {
      t.cx = t.cy = 0;
      t.r2 = INFINITY;
      return t;
    }
    t.cx = (a2 * (B.y - C.y) + b2 * (C.y - A.y) + c2 * (A.y - B.y)) / d;
    t.cy = (a2 * (C.x - B.x) + b2 * (A.x - C.x) + c2 * (B.x - A.x)) / d;
    t.r2 = (A.x - t.cx) * (A.x - t.cx) + (A.y - t.cy) * (A.y - t.cy);
    return t;
  };

  std::vector<Tri> tris{make(s0, s0 + 1, s0 + 2)};
  for (std::size_t i = 0; i < s0; ++i) {
    const Point2 p = pts[i];
    std::vector<Tri> keep;
    std::map<std::pair<std::size_t, std::size_t>, int> edge_use;
    for (const auto& t : tris) {
      const double dx = p.x - t.cx, dy = p.y - t.cy;
      if (dx * dx + dy * dy < t.r2) {
        for (int e = 0; e < 3; ++e) {
          auto a = t.v[e], b = t.v[(e + 1) % 3];
          edge_use[{std::min(a, b), std::max(a, b)}] += 1;
        }
      } else {
        keep.push_back(t);
      }
    }
    for (const auto& [edge, uses] : edge_use)
      if (uses == 1) keep.push_back(make(edge.first, edge.second, i));
    tris = std::move(keep);
  }
  std::vector<std::array<std::size_t, 3>> out;
  for (const auto& t : tris)
    if (t.v[0] < s0 && t.v[1] < s0 && t.v[2] < s0) out.push_back(t.v);
  return out;
}

/// Indices of the convex hull vertices in counter-clockwise order.
inline std::vector<std::size_t> convex_hull(const std::vector<Point2>& pts) {
  std::vector<std::size_t> idx(pts.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return pts[a].x < pts[b].x || (pts[a].x == pts[b].x && pts[a].y < pts[b].y);
  });
  auto cross = [&](std::size_t o, std::size_t a, std::size_t b) {
    return (pts[a].x - pts[o].x) * (pts[b].y - pts[o].y) - (pts[a].y - pts[o].y) * (pts[b].x - pts[o].x);
  };
  if (idx.size() < 3) return idx;
  std::vector<std::size_t> hull(2 * idx.size());
  std::size_t k = 0;
  for (auto i : idx) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], i) <= 0) --k;
    hull[k++] = i;
  }
  for (std::size_t j = idx.size() - 1, t = k + 1; j-- > 0;) {
    const auto i = idx[j];
    while (k >= t && cross(hull[k - 2], hull[k - 1], i) <= 0) --k;
    hull[k++] = i;
  }
  hull.resize(k - 1);
  return hull;
}

inline bool all_collinear(const std::vector<Point2>& pts) {
  for (std::size_t i = 2; i < pts.size(); ++i) {
    const double c = (pts[1].x - pts[0].x) * (pts[i].y - pts[0].y) - (pts[1].y - pts[0].y) * (pts[i].x - pts[0].x);
    if (std::abs(c) > 1e-12) return false;
  }
  return true;
}

/// Delaunay graph of a point set, including every convex hull edge.
inline Graph delaunay_graph(const std::vector<Point2>& pts) {
  Graph g(pts.size(), 0);
  for (const auto& t : bowyer_watson(pts)) {
    g.add_edge(t[0], t[1]);
    g.add_edge(t[1], t[2]);
    g.add_edge(t[0], t[2]);
  }
  const auto hull = convex_hull(pts);
  for (std::size_t i = 0; i < hull.size() && hull.size() >= 2; ++i) {
    const auto a = hull[i], b = hull[(i + 1) % hull.size()];
    if (a != b) g.add_edge(a, b);
  }
  return g;
}

/// Planar graph: Delaunay triangulation of n uniform points in the unit
/// square. Collinear draws (and any draw yielding a disconnected graph) are
/// resampled up to `max_retries` times.
inline Graph gen_planar(std::size_t n, std::uint64_t seed, int max_retries = 16) {
  require(n >= 3, "gen_planar: need n >= 3");
  Rng rng(seed);
  for (int attempt = 0; attempt <= max_retries; ++attempt) {
    std::vector<Point2> pts(n);
    for (auto& p : pts) p = {rng.uniform(), rng.uniform()};
    if (all_collinear(pts)) continue;
    Graph g = delaunay_graph(pts);
    if (is_connected(g) && g.edge_count() <= 3 * n - 6) return g;
  }
  throw NumericFault("gen_planar: no non-degenerate point set after " + std::to_string(max_retries) +
                     " retries");
}

}  // namespace sbgd
