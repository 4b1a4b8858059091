#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "../errors.hpp"
#include "descriptors.hpp"

namespace sbgd::eval {

enum class Descriptor { degree, clustering, orbit, spectrum };

inline std::string to_string(Descriptor d) {
  switch (d) {
    case Descriptor::degree: return "degree";
    case Descriptor::clustering: return "clustering";
    case Descriptor::orbit: return "orbit";
    case Descriptor::spectrum: return "spectrum";
  }
  return "?";
}

/// Kernel bandwidths. Histograms use a Gaussian of the total-variation
/// distance; orbit vectors (totals divided by n) use a Gaussian RBF.
struct MmdConfig {
  double sigma = 1.0;
  double orbit_sigma = 30.0;
};

/// Total-variation distance between two histograms; the shorter one is
/// zero-padded.
inline double tv_distance(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t m = std::max(x.size(), y.size());
  double s = 0.0;
  for (std::size_t i = 0; i < m; ++i) s += std::abs((i < x.size() ? x[i] : 0.0) - (i < y.size() ? y[i] : 0.0));
  return 0.5 * s;
}

inline double gaussian_tv_kernel(const std::vector<double>& x, const std::vector<double>& y, double sigma) {
  const double d = tv_distance(x, y);
  return std::exp(-d * d / (2.0 * sigma * sigma));
}

inline std::vector<double> orbit_vector(const DescriptorSet& d) {
  require(d.has_orbits, "mmd: orbit descriptor was not computed");
  std::vector<double> v(kOrbitCount);
  const double inv = d.n > 0 ? 1.0 / static_cast<double>(d.n) : 0.0;
  for (std::size_t k = 0; k < kOrbitCount; ++k) v[k] = static_cast<double>(d.orbits[k]) * inv;
  return v;
}

inline double rbf_kernel(const std::vector<double>& x, const std::vector<double>& y, double sigma) {
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += (x[i] - y[i]) * (x[i] - y[i]);
  return std::exp(-s / (2.0 * sigma * sigma));
}

/// sqrt(max(MMD^2, 0)) with the biased V-statistic
/// MMD^2 = mean k(X, X) + mean k(Y, Y) - 2 mean k(X, Y).
template <class T, class Kernel>
double mmd_from_kernel(const std::vector<T>& xs, const std::vector<T>& ys, Kernel&& k) {
  require(!xs.empty() && !ys.empty(), "mmd: both sets must be nonempty");
  auto mean_k = [&](const std::vector<T>& a, const std::vector<T>& b) {
    double s = 0.0;
    for (const auto& x : a)
      for (const auto& y : b) s += k(x, y);
    return s / (static_cast<double>(a.size()) * static_cast<double>(b.size()));
  };
  const double m2 = mean_k(xs, xs) + mean_k(ys, ys) - 2.0 * mean_k(xs, ys);
  return std::sqrt(std::max(m2, 0.0));
}

inline double mmd(const std::vector<DescriptorSet>& reference, const std::vector<DescriptorSet>& generated,
                  Descriptor which, const MmdConfig& cfg = {}) {
  require(!reference.empty() && !generated.empty(), "mmd: both sets must be nonempty");
  auto pick = [&](const std::vector<DescriptorSet>& s) {
    std::vector<std::vector<double>> out;
    for (const auto& d : s) {
      switch (which) {
        case Descriptor::degree: out.push_back(d.degree_hist); break;
        case Descriptor::clustering: out.push_back(d.clustering_hist); break;
        case Descriptor::spectrum: out.push_back(d.spectrum_hist); break;
        case Descriptor::orbit: out.push_back(orbit_vector(d)); break;
      }
    }
    return out;
  };
  const auto xs = pick(reference), ys = pick(generated);
  if (which == Descriptor::orbit)
    return mmd_from_kernel(xs, ys, [&](const auto& a, const auto& b) { return rbf_kernel(a, b, cfg.orbit_sigma); });
  return mmd_from_kernel(xs, ys, [&](const auto& a, const auto& b) { return gaussian_tv_kernel(a, b, cfg.sigma); });
}

}  // namespace sbgd::eval
