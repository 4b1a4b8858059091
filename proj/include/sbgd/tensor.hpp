#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <numbers>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "errors.hpp"
#include "memory.hpp"
#include "rng.hpp"

namespace sbgd {

/// Extents of a matrix. Every tensor is two-dimensional; a scalar is 1x1 and
/// a vector is a single row. Zero extents are permitted so that feature-less
/// graphs (F = 0) flow through the same code.
struct Shape {
  std::size_t rows = 0;
  std::size_t cols = 0;

  std::size_t numel() const { return rows * cols; }
  bool operator==(const Shape&) const = default;
  std::string str() const { return "[" + std::to_string(rows) + "x" + std::to_string(cols) + "]"; }
};

class Tensor;

namespace detail {

struct Node;
using BackwardFn = std::function<void(Node&)>;

inline std::uint64_t next_sequence() {
  static std::atomic<std::uint64_t> counter{0};
  return counter.fetch_add(1, std::memory_order_relaxed);
}

/// One recorded value. A node with a backward rule is a tape entry; its
/// parents are the entries it read. Sequence numbers increase with creation,
/// so ordering by sequence is a topological order of the tape.
struct Node {
  Shape shape;
  Buffer value;
  Buffer grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  BackwardFn backward;
  std::uint64_t sequence = next_sequence();
  const char* op = "leaf";

  double* ensure_grad() {
    if (grad.size() != value.size()) grad = Buffer(value.size());
    return grad.data();
  }
};

}  // namespace detail

/// Dense row-major matrix of doubles with optional gradient recording.
///
/// Copies are shallow handles onto the same node. An operation whose inputs
/// include a tensor with `requires_grad` records itself; otherwise it
/// computes the value only.
class Tensor {
 public:
  Tensor() : node_(std::make_shared<detail::Node>()) {}

  static Tensor zeros(Shape shape) { return filled(shape, 0.0); }
  static Tensor ones(Shape shape) { return filled(shape, 1.0); }

  static Tensor filled(Shape shape, double value) {
    Tensor t;
    t.node_->shape = shape;
    t.node_->value = Buffer(shape.numel(), value);
    return t;
  }

  static Tensor from(Shape shape, std::vector<double> values) {
    require(values.size() == shape.numel(),
            "Tensor::from: " + std::to_string(values.size()) + " values for shape " + shape.str());
    Tensor t;
    t.node_->shape = shape;
    t.node_->value = Buffer(std::move(values));
    return t;
  }

  static Tensor scalar(double v) { return from({1, 1}, {v}); }

  static Tensor randn(Shape shape, Rng& rng, double scale = 1.0) {
    std::vector<double> v(shape.numel());
    for (auto& x : v) x = scale * rng.normal();
    return from(shape, std::move(v));
  }

  static Tensor uniform(Shape shape, Rng& rng, double lo, double hi) {
    std::vector<double> v(shape.numel());
    for (auto& x : v) x = rng.uniform(lo, hi);
    return from(shape, std::move(v));
  }

  const Shape& shape() const { return node_->shape; }
  std::size_t rows() const { return node_->shape.rows; }
  std::size_t cols() const { return node_->shape.cols; }
  std::size_t numel() const { return node_->shape.numel(); }

  std::span<const double> data() const { return {node_->value.data(), node_->value.size()}; }

  /// Mutable storage. Only meaningful for leaves (parameters, inputs); writing
  /// to a recorded intermediate invalidates its consumers' gradients.
  std::span<double> data_mut() { return {node_->value.data(), node_->value.size()}; }

  double at(std::size_t r, std::size_t c) const { return node_->value[r * cols() + c]; }
  double item() const {
    require(numel() == 1, "item() on non-scalar tensor " + shape().str());
    return node_->value[0];
  }

  bool requires_grad() const { return node_->requires_grad; }
  Tensor& set_requires_grad(bool on) {
    node_->requires_grad = on;
    return *this;
  }

  /// Accumulated gradient; all zeros if backward never reached this tensor.
  std::vector<double> grad() const {
    if (node_->grad.size() != numel()) return std::vector<double>(numel(), 0.0);
    return node_->grad.values();
  }
  std::span<double> grad_mut() { return {node_->ensure_grad(), numel()}; }
  bool has_grad() const { return node_->grad.size() == numel() && numel() > 0; }
  void zero_grad() { node_->grad.reset(); }

  /// Same values, no history.
  Tensor detach() const { return from(shape(), node_->value.values()); }

  const char* op_name() const { return node_->op; }
  std::shared_ptr<detail::Node> node() const { return node_; }
  explicit Tensor(std::shared_ptr<detail::Node> n) : node_(std::move(n)) {}

 private:
  std::shared_ptr<detail::Node> node_;
};

namespace detail {

inline bool& grad_recording() {
  thread_local bool on = true;
  return on;
}

inline void check_finite(const Node& n) {
  const double* v = n.value.data();
  for (std::size_t i = 0; i < n.value.size(); ++i) {
    if (!std::isfinite(v[i])) {
      throw NumericFault(std::string("non-finite value produced by ") + n.op + " " + n.shape.str());
    }
  }
}

inline Tensor make_result(Shape shape, Buffer&& value, const char* op,
                          std::initializer_list<const Tensor*> inputs, BackwardFn fn) {
  auto node = std::make_shared<Node>();
  node->shape = shape;
  node->value = std::move(value);
  node->op = op;
  check_finite(*node);
  bool any = false;
  for (const Tensor* t : inputs) any = any || t->requires_grad();
  if (any && grad_recording()) {
    node->requires_grad = true;
    for (const Tensor* t : inputs) node->parents.push_back(t->node());
    node->backward = std::move(fn);
  }
  return Tensor(std::move(node));
}

inline Tensor make_result(Shape shape, Buffer&& value, const char* op,
                          const std::vector<Tensor>& inputs, BackwardFn fn) {
  auto node = std::make_shared<Node>();
  node->shape = shape;
  node->value = std::move(value);
  node->op = op;
  check_finite(*node);
  bool any = false;
  for (const auto& t : inputs) any = any || t.requires_grad();
  if (any && grad_recording()) {
    node->requires_grad = true;
    for (const auto& t : inputs) node->parents.push_back(t.node());
    node->backward = std::move(fn);
  }
  return Tensor(std::move(node));
}

// C (m x n) += A (m x k) * B (k x n)
inline void gemm_nn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
                    std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    double* ci = c + i * n;
    const double* ai = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = ai[p];
      if (av == 0.0) continue;
      const double* bp = b + p * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += av * bp[j];
    }
  }
}

// C (m x n) += A (m x k) * B^T where B is (n x k)
inline void gemm_nt(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
                    std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* ai = a + i * k;
    for (std::size_t j = 0; j < n; ++j) {
      const double* bj = b + j * k;
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s += ai[p] * bj[p];
      c[i * n + j] += s;
    }
  }
}

// C (m x n) += A^T * B where A is (k x m), B is (k x n)
inline void gemm_tn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
                    std::size_t n) {
  for (std::size_t p = 0; p < k; ++p) {
    const double* ap = a + p * m;
    const double* bp = b + p * n;
    for (std::size_t i = 0; i < m; ++i) {
      const double av = ap[i];
      if (av == 0.0) continue;
      double* ci = c + i * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += av * bp[j];
    }
  }
}

inline Shape broadcast_shape(const Shape& a, const Shape& b, const char* op) {
  auto dim = [&](std::size_t x, std::size_t y) {
    if (x == y || y == 1) return x;
    if (x == 1) return y;
    throw ContractViolation(std::string(op) + ": shapes " + a.str() + " and " + b.str() +
                            " do not broadcast");
  };
  return {dim(a.rows, b.rows), dim(a.cols, b.cols)};
}

// Sums `g` (shape `out`) down to `target` along broadcast axes and adds into dst.
inline void reduce_into(const double* g, const Shape& out, const Shape& target, double* dst,
                        double factor = 1.0) {
  for (std::size_t i = 0; i < out.rows; ++i) {
    const std::size_t ti = target.rows == 1 ? 0 : i;
    for (std::size_t j = 0; j < out.cols; ++j) {
      const std::size_t tj = target.cols == 1 ? 0 : j;
      dst[ti * target.cols + tj] += factor * g[i * out.cols + j];
    }
  }
}

}  // namespace detail

// ---- elementwise arithmetic -------------------------------------------------

inline Tensor add(const Tensor& a, const Tensor& b) {
  const Shape out = detail::broadcast_shape(a.shape(), b.shape(), "add");
  Buffer v(out.numel());
  const Shape sa = a.shape(), sb = b.shape();
  const auto av = a.data();
  const auto bv = b.data();
  for (std::size_t i = 0; i < out.rows; ++i) {
    const std::size_t ia = (sa.rows == 1 ? 0 : i) * sa.cols;
    const std::size_t ib = (sb.rows == 1 ? 0 : i) * sb.cols;
    for (std::size_t j = 0; j < out.cols; ++j)
      v[i * out.cols + j] = av[ia + (sa.cols == 1 ? 0 : j)] + bv[ib + (sb.cols == 1 ? 0 : j)];
  }
  return detail::make_result(out, std::move(v), "add", {&a, &b}, [](detail::Node& self) {
    for (auto& p : self.parents) {
      if (!p->requires_grad) continue;
      detail::reduce_into(self.grad.data(), self.shape, p->shape, p->ensure_grad());
    }
  });
}

inline Tensor sub(const Tensor& a, const Tensor& b) {
  const Shape out = detail::broadcast_shape(a.shape(), b.shape(), "sub");
  Buffer v(out.numel());
  const Shape sa = a.shape(), sb = b.shape();
  const auto av = a.data();
  const auto bv = b.data();
  for (std::size_t i = 0; i < out.rows; ++i) {
    const std::size_t ia = (sa.rows == 1 ? 0 : i) * sa.cols;
    const std::size_t ib = (sb.rows == 1 ? 0 : i) * sb.cols;
    for (std::size_t j = 0; j < out.cols; ++j)
      v[i * out.cols + j] = av[ia + (sa.cols == 1 ? 0 : j)] - bv[ib + (sb.cols == 1 ? 0 : j)];
  }
  return detail::make_result(out, std::move(v), "sub", {&a, &b}, [](detail::Node& self) {
    auto& pa = self.parents[0];
    auto& pb = self.parents[1];
    if (pa->requires_grad) detail::reduce_into(self.grad.data(), self.shape, pa->shape, pa->ensure_grad());
    if (pb->requires_grad)
      detail::reduce_into(self.grad.data(), self.shape, pb->shape, pb->ensure_grad(), -1.0);
  });
}

/// Elementwise (Hadamard) product with broadcasting.
inline Tensor mul(const Tensor& a, const Tensor& b) {
  const Shape out = detail::broadcast_shape(a.shape(), b.shape(), "mul");
  Buffer v(out.numel());
  const Shape sa = a.shape(), sb = b.shape();
  const auto av = a.data();
  const auto bv = b.data();
  for (std::size_t i = 0; i < out.rows; ++i) {
    const std::size_t ia = (sa.rows == 1 ? 0 : i) * sa.cols;
    const std::size_t ib = (sb.rows == 1 ? 0 : i) * sb.cols;
    for (std::size_t j = 0; j < out.cols; ++j)
      v[i * out.cols + j] = av[ia + (sa.cols == 1 ? 0 : j)] * bv[ib + (sb.cols == 1 ? 0 : j)];
  }
  return detail::make_result(out, std::move(v), "mul", {&a, &b}, [](detail::Node& self) {
    const Shape out = self.shape;
    for (int which = 0; which < 2; ++which) {
      auto& p = self.parents[which];
      auto& q = self.parents[1 - which];
      if (!p->requires_grad) continue;
      double* dst = p->ensure_grad();
      const Shape sp = p->shape, sq = q->shape;
      for (std::size_t i = 0; i < out.rows; ++i) {
        const std::size_t ip = (sp.rows == 1 ? 0 : i) * sp.cols;
        const std::size_t iq = (sq.rows == 1 ? 0 : i) * sq.cols;
        for (std::size_t j = 0; j < out.cols; ++j) {
          dst[ip + (sp.cols == 1 ? 0 : j)] +=
              self.grad[i * out.cols + j] * q->value[iq + (sq.cols == 1 ? 0 : j)];
        }
      }
    }
  });
}

inline Tensor scale(const Tensor& a, double s) {
  Buffer v(a.numel());
  const auto av = a.data();
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = s * av[i];
  return detail::make_result(a.shape(), std::move(v), "scale", {&a}, [s](detail::Node& self) {
    double* dst = self.parents[0]->ensure_grad();
    for (std::size_t i = 0; i < self.grad.size(); ++i) dst[i] += s * self.grad[i];
  });
}

inline Tensor shift(const Tensor& a, double s) {
  Buffer v(a.numel());
  const auto av = a.data();
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = av[i] + s;
  return detail::make_result(a.shape(), std::move(v), "shift", {&a}, [](detail::Node& self) {
    double* dst = self.parents[0]->ensure_grad();
    for (std::size_t i = 0; i < self.grad.size(); ++i) dst[i] += self.grad[i];
  });
}

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, double s) { return scale(a, s); }
inline Tensor operator*(double s, const Tensor& a) { return scale(a, s); }

// ---- linear algebra ---------------------------------------------------------

inline Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows()) {
    throw ContractViolation("matmul: inner extents differ for " + a.shape().str() + " and " +
                            b.shape().str());
  }
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  Buffer v(m * n);
  detail::gemm_nn(a.data().data(), b.data().data(), v.data(), m, k, n);
  return detail::make_result({m, n}, std::move(v), "matmul", {&a, &b}, [m, k, n](detail::Node& self) {
    auto& pa = self.parents[0];
    auto& pb = self.parents[1];
    if (pa->requires_grad) detail::gemm_nt(self.grad.data(), pb->value.data(), pa->ensure_grad(), m, n, k);
    if (pb->requires_grad) detail::gemm_tn(pa->value.data(), self.grad.data(), pb->ensure_grad(), k, m, n);
  });
}

/// a * b^T without materializing the transpose.
inline Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.cols()) {
    throw ContractViolation("matmul_nt: inner extents differ for " + a.shape().str() + " and " +
                            b.shape().str() + "^T");
  }
  const std::size_t m = a.rows(), k = a.cols(), n = b.rows();
  Buffer v(m * n);
  detail::gemm_nt(a.data().data(), b.data().data(), v.data(), m, k, n);
  return detail::make_result({m, n}, std::move(v), "matmul_nt", {&a, &b}, [m, k, n](detail::Node& self) {
    auto& pa = self.parents[0];
    auto& pb = self.parents[1];
    // dA = dC * B ; dB = dC^T * A
    if (pa->requires_grad) detail::gemm_nn(self.grad.data(), pb->value.data(), pa->ensure_grad(), m, n, k);
    if (pb->requires_grad) detail::gemm_tn(self.grad.data(), pa->value.data(), pb->ensure_grad(), n, m, k);
  });
}

inline Tensor transpose(const Tensor& a) {
  const std::size_t r = a.rows(), c = a.cols();
  Buffer v(a.numel());
  const auto av = a.data();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) v[j * r + i] = av[i * c + j];
  return detail::make_result({c, r}, std::move(v), "transpose", {&a}, [r, c](detail::Node& self) {
    double* dst = self.parents[0]->ensure_grad();
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) dst[i * c + j] += self.grad[j * r + i];
  });
}

inline Tensor reshape(const Tensor& a, std::size_t rows, std::size_t cols) {
  if (rows * cols != a.numel()) {
    throw ContractViolation("reshape: cannot view " + a.shape().str() + " as " +
                            Shape{rows, cols}.str());
  }
  Buffer v(std::vector<double>(a.data().begin(), a.data().end()));
  return detail::make_result({rows, cols}, std::move(v), "reshape", {&a}, [](detail::Node& self) {
    double* dst = self.parents[0]->ensure_grad();
    for (std::size_t i = 0; i < self.grad.size(); ++i) dst[i] += self.grad[i];
  });
}

// ---- structural -------------------------------------------------------------

/// Concatenates along axis 0 (stack rows) or axis 1 (append columns).
inline Tensor concat(const std::vector<Tensor>& parts, int axis) {
  require(!parts.empty(), "concat: no inputs");
  require(axis == 0 || axis == 1, "concat: axis must be 0 or 1");
  Shape out = parts.front().shape();
  for (std::size_t p = 1; p < parts.size(); ++p) {
    const Shape s = parts[p].shape();
    if (axis == 0) {
      if (s.cols != out.cols)
        throw ContractViolation("concat(axis=0): shapes " + out.str() + " and " + s.str());
      out.rows += s.rows;
    } else {
      if (s.rows != out.rows)
        throw ContractViolation("concat(axis=1): shapes " + out.str() + " and " + s.str());
      out.cols += s.cols;
    }
  }
  Buffer v(out.numel());
  std::vector<std::size_t> offsets;
  std::size_t off = 0;
  for (const auto& t : parts) {
    offsets.push_back(off);
    const auto d = t.data();
    if (axis == 0) {
      std::copy(d.begin(), d.end(), v.data() + off * out.cols);
      off += t.rows();
    } else {
      for (std::size_t i = 0; i < t.rows(); ++i)
        for (std::size_t j = 0; j < t.cols(); ++j) v[i * out.cols + off + j] = d[i * t.cols() + j];
      off += t.cols();
    }
  }
  return detail::make_result(out, std::move(v), "concat", parts, [axis, offsets](detail::Node& self) {
    for (std::size_t p = 0; p < self.parents.size(); ++p) {
      auto& par = self.parents[p];
      if (!par->requires_grad) continue;
      double* dst = par->ensure_grad();
      const Shape s = par->shape;
      if (axis == 0) {
        const double* src = self.grad.data() + offsets[p] * self.shape.cols;
        for (std::size_t i = 0; i < s.numel(); ++i) dst[i] += src[i];
      } else {
        for (std::size_t i = 0; i < s.rows; ++i)
          for (std::size_t j = 0; j < s.cols; ++j)
            dst[i * s.cols + j] += self.grad[i * self.shape.cols + offsets[p] + j];
      }
    }
  });
}

/// Half-open range [begin, end) along the axis.
inline Tensor slice(const Tensor& a, int axis, std::size_t begin, std::size_t end) {
  require(axis == 0 || axis == 1, "slice: axis must be 0 or 1");
  const std::size_t extent = axis == 0 ? a.rows() : a.cols();
  if (begin > end || end > extent) {
    throw ContractViolation("slice: range [" + std::to_string(begin) + "," + std::to_string(end) +
                            ") out of bounds for " + a.shape().str());
  }
  const Shape in = a.shape();
  const Shape out = axis == 0 ? Shape{end - begin, in.cols} : Shape{in.rows, end - begin};
  Buffer v(out.numel());
  const auto av = a.data();
  for (std::size_t i = 0; i < out.rows; ++i)
    for (std::size_t j = 0; j < out.cols; ++j)
      v[i * out.cols + j] = axis == 0 ? av[(i + begin) * in.cols + j] : av[i * in.cols + j + begin];
  return detail::make_result(out, std::move(v), "slice", {&a}, [axis, begin, in](detail::Node& self) {
    double* dst = self.parents[0]->ensure_grad();
    const Shape out = self.shape;
    for (std::size_t i = 0; i < out.rows; ++i)
      for (std::size_t j = 0; j < out.cols; ++j) {
        const std::size_t src = axis == 0 ? (i + begin) * in.cols + j : i * in.cols + j + begin;
        dst[src] += self.grad[i * out.cols + j];
      }
  });
}

/// Row gather: out[r] = a[index[r]]. Gradients scatter-add back.
inline Tensor gather_rows(const Tensor& a, std::shared_ptr<const std::vector<std::size_t>> index) {
  const std::size_t c = a.cols();
  Buffer v(index->size() * c);
  const auto av = a.data();
  for (std::size_t r = 0; r < index->size(); ++r) {
    const std::size_t src = (*index)[r];
    if (src >= a.rows())
      throw ContractViolation("gather_rows: index " + std::to_string(src) + " out of range for " +
                              a.shape().str());
    std::copy(av.begin() + static_cast<std::ptrdiff_t>(src * c),
              av.begin() + static_cast<std::ptrdiff_t>((src + 1) * c), v.data() + r * c);
  }
  return detail::make_result({index->size(), c}, std::move(v), "gather_rows", {&a},
                             [index, c](detail::Node& self) {
                               double* dst = self.parents[0]->ensure_grad();
                               for (std::size_t r = 0; r < index->size(); ++r) {
                                 const double* g = self.grad.data() + r * c;
                                 double* d = dst + (*index)[r] * c;
                                 for (std::size_t j = 0; j < c; ++j) d[j] += g[j];
                               }
                             });
}

// ---- nonlinearities ---------------------------------------------------------

inline Tensor relu(const Tensor& a) {
  Buffer v(a.numel());
  const auto av = a.data();
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = av[i] > 0.0 ? av[i] : 0.0;
  return detail::make_result(a.shape(), std::move(v), "relu", {&a}, [](detail::Node& self) {
    auto& p = self.parents[0];
    double* dst = p->ensure_grad();
    for (std::size_t i = 0; i < self.grad.size(); ++i)
      if (p->value[i] > 0.0) dst[i] += self.grad[i];
  });
}

/// Exact GELU, x * Phi(x).
inline Tensor gelu(const Tensor& a) {
  Buffer v(a.numel());
  const auto av = a.data();
  for (std::size_t i = 0; i < v.size(); ++i)
    v[i] = 0.5 * av[i] * (1.0 + std::erf(av[i] / std::numbers::sqrt2));
  return detail::make_result(a.shape(), std::move(v), "gelu", {&a}, [](detail::Node& self) {
    auto& p = self.parents[0];
    double* dst = p->ensure_grad();
    const double inv_sqrt_2pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      const double x = p->value[i];
      const double cdf = 0.5 * (1.0 + std::erf(x / std::numbers::sqrt2));
      const double pdf = inv_sqrt_2pi * std::exp(-0.5 * x * x);
      dst[i] += self.grad[i] * (cdf + x * pdf);
    }
  });
}

inline Tensor sigmoid(const Tensor& a) {
  Buffer v(a.numel());
  const auto av = a.data();
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = 1.0 / (1.0 + std::exp(-av[i]));
  return detail::make_result(a.shape(), std::move(v), "sigmoid", {&a}, [](detail::Node& self) {
    double* dst = self.parents[0]->ensure_grad();
    for (std::size_t i = 0; i < self.grad.size(); ++i)
      dst[i] += self.grad[i] * self.value[i] * (1.0 - self.value[i]);
  });
}

/// Softmax along each row.
inline Tensor softmax_rows(const Tensor& a) {
  const std::size_t r = a.rows(), c = a.cols();
  Buffer v(a.numel());
  const auto av = a.data();
  for (std::size_t i = 0; i < r; ++i) {
    const double* x = av.data() + i * c;
    double* y = v.data() + i * c;
    double mx = -INFINITY;
    for (std::size_t j = 0; j < c; ++j) mx = std::max(mx, x[j]);
    double s = 0.0;
    for (std::size_t j = 0; j < c; ++j) s += (y[j] = std::exp(x[j] - mx));
    for (std::size_t j = 0; j < c; ++j) y[j] /= s;
  }
  return detail::make_result(a.shape(), std::move(v), "softmax_rows", {&a}, [r, c](detail::Node& self) {
    double* dst = self.parents[0]->ensure_grad();
    for (std::size_t i = 0; i < r; ++i) {
      const double* y = self.value.data() + i * c;
      const double* g = self.grad.data() + i * c;
      double dot = 0.0;
      for (std::size_t j = 0; j < c; ++j) dot += g[j] * y[j];
      for (std::size_t j = 0; j < c; ++j) dst[i * c + j] += y[j] * (g[j] - dot);
    }
  });
}

/// Normalizes each row to zero mean / unit variance, then applies the 1 x c
/// affine parameters.
inline Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps = 1e-5) {
  const std::size_t r = x.rows(), c = x.cols();
  if (gain.shape() != Shape{1, c} || bias.shape() != Shape{1, c}) {
    throw ContractViolation("layer_norm: affine shapes " + gain.shape().str() + "/" +
                            bias.shape().str() + " do not match input " + x.shape().str());
  }
  Buffer v(x.numel());
  auto xhat = std::make_shared<std::vector<double>>(x.numel());
  auto inv_std = std::make_shared<std::vector<double>>(r);
  const auto xv = x.data();
  const auto gv = gain.data();
  const auto bv = bias.data();
  for (std::size_t i = 0; i < r; ++i) {
    const double* row = xv.data() + i * c;
    double mean = 0.0;
    for (std::size_t j = 0; j < c; ++j) mean += row[j];
    mean /= static_cast<double>(c);
    double var = 0.0;
    for (std::size_t j = 0; j < c; ++j) var += (row[j] - mean) * (row[j] - mean);
    var /= static_cast<double>(c);
    const double is = 1.0 / std::sqrt(var + eps);
    (*inv_std)[i] = is;
    for (std::size_t j = 0; j < c; ++j) {
      const double h = (row[j] - mean) * is;
      (*xhat)[i * c + j] = h;
      v[i * c + j] = gv[j] * h + bv[j];
    }
  }
  return detail::make_result(x.shape(), std::move(v), "layer_norm", {&x, &gain, &bias},
                             [r, c, xhat, inv_std](detail::Node& self) {
                               auto& px = self.parents[0];
                               auto& pg = self.parents[1];
                               auto& pb = self.parents[2];
                               const double* g = self.grad.data();
                               if (pg->requires_grad) {
                                 double* dg = pg->ensure_grad();
                                 for (std::size_t i = 0; i < r; ++i)
                                   for (std::size_t j = 0; j < c; ++j) dg[j] += g[i * c + j] * (*xhat)[i * c + j];
                               }
                               if (pb->requires_grad) {
                                 double* db = pb->ensure_grad();
                                 for (std::size_t i = 0; i < r; ++i)
                                   for (std::size_t j = 0; j < c; ++j) db[j] += g[i * c + j];
                               }
                               if (px->requires_grad) {
                                 double* dx = px->ensure_grad();
                                 const double* gain = pg->value.data();
                                 std::vector<double> dh(c);
                                 for (std::size_t i = 0; i < r; ++i) {
                                   double mean_dh = 0.0, mean_dh_h = 0.0;
                                   for (std::size_t j = 0; j < c; ++j) {
                                     dh[j] = g[i * c + j] * gain[j];
                                     mean_dh += dh[j];
                                     mean_dh_h += dh[j] * (*xhat)[i * c + j];
                                   }
                                   mean_dh /= static_cast<double>(c);
                                   mean_dh_h /= static_cast<double>(c);
                                   for (std::size_t j = 0; j < c; ++j)
                                     dx[i * c + j] += (*inv_std)[i] *
                                                      (dh[j] - mean_dh - (*xhat)[i * c + j] * mean_dh_h);
                                 }
                               }
                             });
}

// ---- reductions and losses --------------------------------------------------

inline Tensor sum(const Tensor& a) {
  double s = 0.0;
  for (double x : a.data()) s += x;
  return detail::make_result({1, 1}, Buffer(1, s), "sum", {&a}, [](detail::Node& self) {
    double* dst = self.parents[0]->ensure_grad();
    const double g = self.grad[0];
    for (std::size_t i = 0; i < self.parents[0]->value.size(); ++i) dst[i] += g;
  });
}

/// Mean of all entries; the mean of an empty tensor is defined as 0.
inline Tensor mean(const Tensor& a) {
  const std::size_t n = a.numel();
  double s = 0.0;
  for (double x : a.data()) s += x;
  const double inv = n == 0 ? 0.0 : 1.0 / static_cast<double>(n);
  return detail::make_result({1, 1}, Buffer(1, s * inv), "mean", {&a}, [inv](detail::Node& self) {
    double* dst = self.parents[0]->ensure_grad();
    const double g = self.grad[0] * inv;
    for (std::size_t i = 0; i < self.parents[0]->value.size(); ++i) dst[i] += g;
  });
}

/// Mean squared error over all entries; 0 for empty operands.
inline Tensor mse_loss(const Tensor& prediction, const Tensor& target) {
  if (prediction.shape() != target.shape()) {
    throw ContractViolation("mse_loss: shapes " + prediction.shape().str() + " and " +
                            target.shape().str() + " differ");
  }
  const std::size_t n = prediction.numel();
  const auto p = prediction.data();
  const auto t = target.data();
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += (p[i] - t[i]) * (p[i] - t[i]);
  const double inv = n == 0 ? 0.0 : 1.0 / static_cast<double>(n);
  return detail::make_result({1, 1}, Buffer(1, s * inv), "mse_loss", {&prediction, &target},
                             [n, inv](detail::Node& self) {
                               auto& pp = self.parents[0];
                               auto& pt = self.parents[1];
                               const double g = 2.0 * inv * self.grad[0];
                               if (pp->requires_grad) {
                                 double* d = pp->ensure_grad();
                                 for (std::size_t i = 0; i < n; ++i) d[i] += g * (pp->value[i] - pt->value[i]);
                               }
                               if (pt->requires_grad) {
                                 double* d = pt->ensure_grad();
                                 for (std::size_t i = 0; i < n; ++i) d[i] -= g * (pp->value[i] - pt->value[i]);
                               }
                             });
}

// ---- reverse pass -----------------------------------------------------------

/// Disables history recording on this thread while alive, for inference.
class NoGradGuard {
 public:
  NoGradGuard() : previous_(detail::grad_recording()) { detail::grad_recording() = false; }
  ~NoGradGuard() { detail::grad_recording() = previous_; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

/// The recorded operations reachable from a root, ordered so that every node
/// follows all of its parents.
struct ComputeTape {
  std::vector<std::shared_ptr<detail::Node>> nodes;

  static ComputeTape collect(const Tensor& root) {
    ComputeTape tape;
    std::unordered_set<detail::Node*> seen;
    std::vector<std::shared_ptr<detail::Node>> stack{root.node()};
    while (!stack.empty()) {
      auto n = std::move(stack.back());
      stack.pop_back();
      if (!n->requires_grad || !seen.insert(n.get()).second) continue;
      for (auto& p : n->parents) stack.push_back(p);
      tape.nodes.push_back(std::move(n));
    }
    std::sort(tape.nodes.begin(), tape.nodes.end(),
              [](const auto& a, const auto& b) { return a->sequence < b->sequence; });
    return tape;
  }
};

/// Propagates d(loss)/d(.) to every reachable tensor that requires gradients.
/// Leaf gradients accumulate across calls until `zero_grad`; intermediate
/// gradients and the recorded history are released as the pass proceeds.
inline void backward(const Tensor& loss) {
  if (loss.numel() != 1) {
    throw ContractViolation("backward: loss must be scalar, got " + loss.shape().str());
  }
  if (!loss.requires_grad()) return;
  ComputeTape tape = ComputeTape::collect(loss);
  loss.node()->ensure_grad()[0] += 1.0;
  for (auto it = tape.nodes.rbegin(); it != tape.nodes.rend(); ++it) {
    auto& n = *it;
    if (!n->backward) continue;  // leaf
    if (n->grad.size() == n->value.size()) n->backward(*n);
    n->grad.reset();
    n->backward = nullptr;
    n->parents.clear();
    n.reset();
  }
}

}  // namespace sbgd
