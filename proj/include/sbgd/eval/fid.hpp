#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "../errors.hpp"
#include "../graph.hpp"
#include "../linalg.hpp"
#include "../rng.hpp"
#include "descriptors.hpp"

namespace sbgd::eval {

inline constexpr std::uint64_t kFidEncoderSeed = 20240601;

/// Sum of values in ascending order, so that the result does not depend on
/// the order in which the values were produced.
inline double ordered_sum(std::vector<double>& values) {
  std::sort(values.begin(), values.end());
  double s = 0.0;
  for (double v : values) s += v;
  return s;
}

/// Untrained message-passing encoder with fixed random weights: node inputs
/// [degree, clustering, 1], three tanh rounds of width 32 over the
/// neighbour mean, and sum pooling over nodes. Sums are order independent,
/// so relabelling the nodes leaves the embedding bitwise unchanged.
struct FidEncoder {
  static constexpr std::size_t width = 32;
  static constexpr std::size_t rounds = 3;
  static constexpr std::size_t input_dim = 3;

  struct Round {
    std::size_t in = 0;
    std::vector<double> w_self, w_nbr, b;  // in x width, in x width, width
  };
  std::vector<Round> layers;

  static FidEncoder make(std::uint64_t seed = kFidEncoderSeed) {
    FidEncoder e;
    Rng rng(seed);
    for (std::size_t r = 0; r < rounds; ++r) {
      Round l;
      l.in = r == 0 ? input_dim : width;
      const double s = 1.0 / std::sqrt(static_cast<double>(2 * l.in));
      l.w_self.resize(l.in * width);
      l.w_nbr.resize(l.in * width);
      l.b.resize(width);
      for (auto& v : l.w_self) v = s * rng.normal();
      for (auto& v : l.w_nbr) v = s * rng.normal();
      for (auto& v : l.b) v = 0.1 * rng.normal();
      e.layers.push_back(std::move(l));
    }
    return e;
  }

  std::vector<double> embed(const Graph& g) const {
    const std::size_t n = g.n();
    const auto clus = clustering(g);
    const auto nbrs = g.adjacency_lists();
    std::vector<double> h(n * input_dim);
    for (std::size_t v = 0; v < n; ++v) {
      h[v * input_dim] = static_cast<double>(nbrs[v].size());
      h[v * input_dim + 1] = clus[v];
      h[v * input_dim + 2] = 1.0;
    }
    std::size_t dim = input_dim;
    for (const auto& l : layers) {
      std::vector<double> next(n * width), agg(dim), terms;
      for (std::size_t v = 0; v < n; ++v) {
        for (std::size_t k = 0; k < dim; ++k) {
          terms.clear();
          for (auto u : nbrs[v]) terms.push_back(h[u * dim + k]);
          agg[k] = ordered_sum(terms);
        }
        const double inv = nbrs[v].empty() ? 0.0 : 1.0 / static_cast<double>(nbrs[v].size());
        for (std::size_t j = 0; j < width; ++j) {
          double s = l.b[j];
          for (std::size_t k = 0; k < dim; ++k)
            s += h[v * dim + k] * l.w_self[k * width + j] + agg[k] * inv * l.w_nbr[k * width + j];
          next[v * width + j] = std::tanh(s);
        }
      }
      h = std::move(next);
      dim = width;
    }
    std::vector<double> pooled(width, 0.0), terms(n);
    for (std::size_t j = 0; j < width; ++j) {
      for (std::size_t v = 0; v < n; ++v) terms[v] = h[v * width + j];
      pooled[j] = ordered_sum(terms);
    }
    return pooled;
  }
};

struct Gaussian {
  std::vector<double> mean;
  linalg::Matrix cov;
};

/// Sample mean and unbiased covariance of row vectors.
inline Gaussian fit_gaussian(const std::vector<std::vector<double>>& rows) {
  require(rows.size() >= 2, "fid: need at least 2 graphs per side, got " + std::to_string(rows.size()));
  const std::size_t d = rows.front().size(), m = rows.size();
  Gaussian g{std::vector<double>(d, 0.0), linalg::Matrix(d)};
  for (const auto& r : rows)
    for (std::size_t i = 0; i < d; ++i) g.mean[i] += r[i] / static_cast<double>(m);
  for (const auto& r : rows)
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j) g.cov(i, j) += (r[i] - g.mean[i]) * (r[j] - g.mean[j]);
  for (auto& v : g.cov.a) v /= static_cast<double>(m - 1);
  return g;
}

namespace fid_detail {

inline constexpr double kEigenTolerance = 1e-13;

// Eigenvalues below -1e-8 (relative to the matrix scale) mean the input was
// not positive semidefinite; smaller negatives are rounding and become 0.
inline std::vector<double> clipped_eigenvalues(const linalg::EigenResult& e, const char* what) {
  double scale = 1.0;
  for (double v : e.values) scale = std::max(scale, std::abs(v));
  std::vector<double> out;
  for (double v : e.values) {
    if (v < -1e-8 * scale)
      throw NumericFault(std::string("fid: ") + what + " is not positive semidefinite (eigenvalue " +
                         std::to_string(v) + ")");
    out.push_back(std::max(v, 0.0));
  }
  return out;
}

inline linalg::Matrix sqrt_psd(const linalg::Matrix& m, const char* what) {
  const auto e = linalg::jacobi_eigen(m, kEigenTolerance);
  const auto lambda = clipped_eigenvalues(e, what);
  linalg::Matrix out(m.n);
  for (std::size_t j = 0; j < m.n; ++j) {
    const double s = std::sqrt(lambda[j]);
    for (std::size_t i = 0; i < m.n; ++i)
      for (std::size_t k = 0; k < m.n; ++k) out(i, k) += e.vectors(i, j) * s * e.vectors(k, j);
  }
  return out;
}

}  // namespace fid_detail

/// ||mu1 - mu2||^2 + Tr(S1 + S2 - 2 (S1^1/2 S2 S1^1/2)^1/2), clamped at 0.
inline double frechet_distance(const std::vector<double>& mu1, const linalg::Matrix& s1,
                               const std::vector<double>& mu2, const linalg::Matrix& s2) {
  using namespace fid_detail;
  require(mu1.size() == mu2.size() && s1.n == mu1.size() && s2.n == mu2.size(),
          "frechet_distance: dimension mismatch");
  double d = 0.0;
  for (std::size_t i = 0; i < mu1.size(); ++i) d += (mu1[i] - mu2[i]) * (mu1[i] - mu2[i]);
  const auto r1 = sqrt_psd(s1, "first covariance");
  clipped_eigenvalues(linalg::jacobi_eigen(s2, kEigenTolerance), "second covariance");
  auto m = linalg::multiply(linalg::multiply(r1, s2), r1);
  for (std::size_t i = 0; i < m.n; ++i)
    for (std::size_t j = i + 1; j < m.n; ++j) m(i, j) = m(j, i) = 0.5 * (m(i, j) + m(j, i));
  double tr_sqrt = 0.0;
  for (double v : clipped_eigenvalues(linalg::jacobi_eigen(m, kEigenTolerance), "covariance product"))
    tr_sqrt += std::sqrt(v);
  double tr = 0.0;
  for (std::size_t i = 0; i < s1.n; ++i) tr += s1(i, i) + s2(i, i);
  return std::max(0.0, d + tr - 2.0 * tr_sqrt);
}

inline double fid(const std::vector<Graph>& reference, const std::vector<Graph>& generated,
                  std::uint64_t encoder_seed = kFidEncoderSeed) {
  const auto enc = FidEncoder::make(encoder_seed);
  auto embed_all = [&](const std::vector<Graph>& gs) {
    std::vector<std::vector<double>> rows;
    for (const auto& g : gs) rows.push_back(enc.embed(g));
    return rows;
  };
  const auto a = fit_gaussian(embed_all(reference)), b = fit_gaussian(embed_all(generated));
  return frechet_distance(a.mean, a.cov, b.mean, b.cov);
}

}  // namespace sbgd::eval
