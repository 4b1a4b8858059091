#pragma once

#include <algorithm>
#include <array>
#include <vector>

#include "../features.hpp"
#include "../graph.hpp"
#include "../linalg.hpp"
#include "../parallel.hpp"
#include "orbits.hpp"

namespace sbgd::eval {

inline constexpr std::size_t kClusteringBins = 100;
inline constexpr std::size_t kSpectrumBins = 200;

struct DescriptorSet {
  std::size_t n = 0;
  std::vector<double> degree_hist;      // index = degree, normalized
  std::vector<double> clustering_hist;  // kClusteringBins on [0, 1]
  std::array<std::uint64_t, kOrbitCount> orbits{};
  std::vector<double> spectrum_hist;    // kSpectrumBins on [0, 2]
  bool has_orbits = false;
};

inline std::vector<double> degree_histogram(const Graph& g) {
  std::vector<double> h(std::max<std::size_t>(g.n(), 1), 0.0);
  if (g.n() == 0) return h;
  for (std::size_t v = 0; v < g.n(); ++v) h[g.degree(v)] += 1.0;
  for (auto& x : h) x /= static_cast<double>(g.n());
  return h;
}

inline std::vector<double> clustering(const Graph& g) {
  std::vector<char> adj(g.adjacency().begin(), g.adjacency().end());
  return clustering_coefficients(adj, g.n());
}

/// Normalized histogram of values in [lo, hi]; the top edge falls into the last bin.
inline std::vector<double> histogram(const std::vector<double>& values, std::size_t bins, double lo, double hi) {
  std::vector<double> h(bins, 0.0);
  if (values.empty()) return h;
  for (double v : values) {
    const double u = (std::clamp(v, lo, hi) - lo) / (hi - lo);
    h[std::min(bins - 1, static_cast<std::size_t>(u * static_cast<double>(bins)))] += 1.0;
  }
  for (auto& x : h) x /= static_cast<double>(values.size());
  return h;
}

/// Eigenvalues of the normalized Laplacian of the binary adjacency.
inline std::vector<double> laplacian_spectrum(const Graph& g) {
  const std::size_t n = g.n();
  std::vector<double> w(n * n);
  for (std::size_t i = 0; i < n * n; ++i) w[i] = g.adjacency()[i];
  return linalg::jacobi_eigen(normalized_laplacian(w, n)).values;
}

/// All descriptors of one graph. Orbits are skipped (has_orbits = false)
/// when `with_orbits` is off; requesting them above kMaxOrbitNodes throws.
inline DescriptorSet descriptors(const Graph& g, bool with_orbits = true) {
  DescriptorSet d;
  d.n = g.n();
  d.degree_hist = degree_histogram(g);
  d.clustering_hist = histogram(clustering(g), kClusteringBins, 0.0, 1.0);
  d.spectrum_hist = histogram(laplacian_spectrum(g), kSpectrumBins, 0.0, 2.0);
  if (with_orbits) {
    d.orbits = orbit_totals(g);
    d.has_orbits = true;
  }
  return d;
}

inline std::vector<DescriptorSet> descriptors(const std::vector<Graph>& graphs, bool with_orbits = true,
                                              std::size_t threads = 1) {
  std::vector<DescriptorSet> out(graphs.size());
  parallel_for(graphs.size(), threads, [&](std::size_t i) { out[i] = descriptors(graphs[i], with_orbits); });
  return out;
}

}  // namespace sbgd::eval
