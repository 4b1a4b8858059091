#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "diffusion.hpp"
#include "errors.hpp"
#include "linalg.hpp"

namespace sbgd {

/// Per-node structural and spectral descriptors z of a (possibly noisy)
/// block state: [normalized weighted degree, clustering coefficient,
/// eigenvector entries 1..m of the normalized Laplacian].
struct StructuralFeatures {
  static constexpr std::size_t spectral_dim = 4;
  static constexpr std::size_t width = 2 + spectral_dim;

  std::size_t n = 0;
  std::vector<double> z;  // n x width, row-major

  double at(std::size_t v, std::size_t k) const { return z[v * width + k]; }
};

/// Convergence tolerance for the Laplacian eigensolver. It is much tighter
/// than the 1e-9 requirement because the eigenvectors feed the denoiser,
/// whose equivariance is checked at 1e-8.
inline constexpr double kFeatureEigenTolerance = 1e-13;

/// Nonnegative edge weights w = clip((a + 1) / 2, 0, 1) with zero diagonal.
inline std::vector<double> state_weights(const AnalogGraphState& s) {
  const std::size_t n = s.n;
  std::vector<double> w(n * n, 0.0);
  for (std::size_t u = 0; u < n; ++u)
    for (std::size_t v = 0; v < n; ++v)
      if (u != v) w[u * n + v] = std::clamp(0.5 * (s.a[u * n + v] + s.a[v * n + u]) * 0.5 + 0.5, 0.0, 1.0);
  return w;
}

/// Local clustering coefficients of a 0/1 adjacency given as an n x n mask.
inline std::vector<double> clustering_coefficients(const std::vector<char>& adj, std::size_t n) {
  std::vector<double> c(n, 0.0);
  std::vector<std::size_t> nb;
  for (std::size_t v = 0; v < n; ++v) {
    nb.clear();
    for (std::size_t u = 0; u < n; ++u)
      if (adj[v * n + u]) nb.push_back(u);
    const std::size_t d = nb.size();
    if (d < 2) continue;
    std::size_t tri = 0;
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = i + 1; j < d; ++j) tri += adj[nb[i] * n + nb[j]] != 0;
    c[v] = 2.0 * static_cast<double>(tri) / static_cast<double>(d * (d - 1));
  }
  return c;
}

/// Symmetric normalized Laplacian I - D^{-1/2} W D^{-1/2}. Isolated nodes
/// keep L_vv = 1 when they have weight, and 0 otherwise.
inline linalg::Matrix normalized_laplacian(const std::vector<double>& w, std::size_t n) {
  std::vector<double> inv_sqrt(n, 0.0);
  for (std::size_t u = 0; u < n; ++u) {
    double d = 0.0;
    for (std::size_t v = 0; v < n; ++v) d += w[u * n + v];
    inv_sqrt[u] = d > 0.0 ? 1.0 / std::sqrt(d) : 0.0;
  }
  linalg::Matrix l(n);
  for (std::size_t u = 0; u < n; ++u)
    for (std::size_t v = 0; v < n; ++v)
      l(u, v) = (u == v ? (inv_sqrt[u] > 0.0 ? 1.0 : 0.0) : 0.0) - inv_sqrt[u] * w[u * n + v] * inv_sqrt[v];
  return l;
}

/// Computes z for a block state. The spectral part holds the eigenvectors of
/// the 2nd..(m+1)th smallest eigenvalues, sign-canonicalized, and is zero
/// padded when the block has fewer than m + 1 nodes.
inline StructuralFeatures extract_features(const AnalogGraphState& state, int /*t*/ = 0) {
  const std::size_t n = state.n;
  StructuralFeatures f;
  f.n = n;
  f.z.assign(n * StructuralFeatures::width, 0.0);
  if (n == 0) return f;

  const auto w = state_weights(state);
  const double norm = n > 1 ? 1.0 / static_cast<double>(n - 1) : 0.0;
  std::vector<char> adj(n * n, 0);
  for (std::size_t u = 0; u < n; ++u) {
    double d = 0.0;
    for (std::size_t v = 0; v < n; ++v) {
      d += w[u * n + v];
      adj[u * n + v] = u != v && state.a[u * n + v] + state.a[v * n + u] > 0.0;
    }
    f.z[u * StructuralFeatures::width] = d * norm;
  }
  const auto clus = clustering_coefficients(adj, n);
  for (std::size_t u = 0; u < n; ++u) f.z[u * StructuralFeatures::width + 1] = clus[u];

  auto eig = linalg::jacobi_eigen(normalized_laplacian(w, n), kFeatureEigenTolerance);
  linalg::canonicalize_signs(eig.vectors);
  const std::size_t m = std::min(StructuralFeatures::spectral_dim, n - 1);
  for (std::size_t j = 0; j < m; ++j)
    for (std::size_t u = 0; u < n; ++u) f.z[u * StructuralFeatures::width + 2 + j] = eig.vectors(u, j + 1);
  return f;
}

}  // namespace sbgd
