#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "errors.hpp"

namespace sbgd::linalg {

/// Square row-major matrix of doubles used by the eigen/Cholesky helpers.
struct Matrix {
  std::size_t n = 0;
  std::vector<double> a;

  Matrix() = default;
  explicit Matrix(std::size_t size, double fill = 0.0) : n(size), a(size * size, fill) {}

  static Matrix identity(std::size_t size) {
    Matrix m(size);
    for (std::size_t i = 0; i < size; ++i) m(i, i) = 1.0;
    return m;
  }

  double& operator()(std::size_t i, std::size_t j) { return a[i * n + j]; }
  double operator()(std::size_t i, std::size_t j) const { return a[i * n + j]; }
};

inline Matrix multiply(const Matrix& x, const Matrix& y) {
  require(x.n == y.n, "linalg::multiply: size mismatch");
  Matrix out(x.n);
  for (std::size_t i = 0; i < x.n; ++i)
    for (std::size_t k = 0; k < x.n; ++k) {
      const double v = x(i, k);
      if (v == 0.0) continue;
      for (std::size_t j = 0; j < x.n; ++j) out(i, j) += v * y(k, j);
    }
  return out;
}

struct EigenResult {
  std::vector<double> values;  // ascending
  Matrix vectors;              // column j is the eigenvector of values[j]
  int sweeps = 0;
};

/// Cyclic Jacobi eigendecomposition of a symmetric matrix.
///
/// Iterates full sweeps of plane rotations until the off-diagonal Frobenius
/// norm drops below `tolerance * max(1, ||A||_F)`. Throws NumericFault if that
/// has not happened after `max_sweeps`.
inline EigenResult jacobi_eigen(Matrix m, double tolerance = 1e-9, int max_sweeps = 100) {
  const std::size_t n = m.n;
  EigenResult r;
  r.vectors = Matrix::identity(n);
  Matrix& v = r.vectors;

  double frob = 0.0;
  for (double x : m.a) frob += x * x;
  const double threshold = tolerance * std::max(1.0, std::sqrt(frob));

  auto off_norm = [&] {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (i != j) s += m(i, j) * m(i, j);
    return std::sqrt(s);
  };

  while (off_norm() >= threshold) {
    if (r.sweeps >= max_sweeps) {
      throw NumericFault("jacobi_eigen: no convergence after " + std::to_string(max_sweeps) +
                         " sweeps (n=" + std::to_string(n) + ")");
    }
    ++r.sweeps;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = m(p, q);
        if (apq == 0.0) continue;
        const double app = m(p, p), aqq = m(q, q);
        const double theta = (aqq - app) / (2.0 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double mkp = m(k, p), mkq = m(k, q);
          m(k, p) = c * mkp - s * mkq;
          m(k, q) = s * mkp + c * mkq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double mpk = m(p, k), mqk = m(q, k);
          m(p, k) = c * mpk - s * mqk;
          m(q, k) = s * mpk + c * mqk;
        }
        m(p, q) = 0.0;
        m(q, p) = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return m(i, i) < m(j, j); });
  Matrix sorted(n);
  r.values.resize(n);
  for (std::size_t c = 0; c < n; ++c) {
    r.values[c] = m(order[c], order[c]);
    for (std::size_t k = 0; k < n; ++k) sorted(k, c) = v(k, order[c]);
  }
  r.vectors = std::move(sorted);
  return r;
}

/// Flips each eigenvector so that its largest-magnitude entry is positive.
inline void canonicalize_signs(Matrix& vectors) {
  const std::size_t n = vectors.n;
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < n; ++k)
      if (std::abs(vectors(k, c)) > std::abs(vectors(best, c))) best = k;
    if (vectors(best, c) < 0)
      for (std::size_t k = 0; k < n; ++k) vectors(k, c) = -vectors(k, c);
  }
}

/// Square root of a symmetric positive semidefinite matrix. Eigenvalues in
/// [-clip, 0) are treated as rounding noise and set to zero; anything more
/// negative is a genuine failure of positive semidefiniteness.
inline Matrix psd_sqrt(const Matrix& m, double clip = 1e-8) {
  auto eig = jacobi_eigen(m);
  const std::size_t n = m.n;
  Matrix out(n);
  for (std::size_t j = 0; j < n; ++j) {
    double lambda = eig.values[j];
    if (lambda < -clip) {
      throw NumericFault("psd_sqrt: matrix is not positive semidefinite (eigenvalue " +
                         std::to_string(lambda) + ")");
    }
    lambda = std::sqrt(std::max(lambda, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
      const double vi = eig.vectors(i, j) * lambda;
      for (std::size_t k = 0; k < n; ++k) out(i, k) += vi * eig.vectors(k, j);
    }
  }
  return out;
}

/// In-place Cholesky factor (lower triangle) of a symmetric positive definite
/// matrix; throws NumericFault if a pivot is not positive.
inline Matrix cholesky(const Matrix& m) {
  const std::size_t n = m.n;
  Matrix l(n);
  for (std::size_t j = 0; j < n; ++j) {
    double d = m(j, j);
    for (std::size_t k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
    if (!(d > 0.0)) throw NumericFault("cholesky: matrix is not positive definite");
    l(j, j) = std::sqrt(d);
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = m(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      l(i, j) = s / l(j, j);
    }
  }
  return l;
}

/// Solves (L L^T) x = b given the Cholesky factor L.
inline std::vector<double> cholesky_solve(const Matrix& l, std::vector<double> b) {
  const std::size_t n = l.n;
  for (std::size_t i = 0; i < n; ++i) {
    double s = b[i];
    for (std::size_t k = 0; k < i; ++k) s -= l(i, k) * b[k];
    b[i] = s / l(i, i);
  }
  for (std::size_t i = n; i-- > 0;) {
    double s = b[i];
    for (std::size_t k = i + 1; k < n; ++k) s -= l(k, i) * b[k];
    b[i] = s / l(i, i);
  }
  return b;
}

}  // namespace sbgd::linalg
