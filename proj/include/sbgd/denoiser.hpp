#pragma once

#include <cmath>
#include <memory>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "diffusion.hpp"
#include "errors.hpp"
#include "features.hpp"
#include "rng.hpp"
#include "tensor.hpp"

namespace sbgd {

struct DenoiserConfig {
  std::size_t feature_dim = 0;  // F
  std::size_t hidden = 64;      // d
  std::size_t heads = 4;        // h
  std::size_t layers = 4;       // L
  std::size_t edge_dim = 8;     // width of the per-pair edge channel
  std::size_t ffn_mult = 2;     // feed-forward width = ffn_mult * d
  std::size_t inter_hidden = 32;  // encoder width of the inter-block predictor
  int steps = 50;               // T, used to normalize t in the time embedding

  static constexpr std::size_t time_frequencies = 16;

  void validate() const {
    require(hidden >= 1 && heads >= 1 && layers >= 1 && edge_dim >= 1 && ffn_mult >= 1 && inter_hidden >= 1,
            "DenoiserConfig: widths, heads and layers must be positive");
    require(hidden % heads == 0, "DenoiserConfig: hidden width " + std::to_string(hidden) +
                                     " is not divisible by head count " + std::to_string(heads));
    require(steps >= 1, "DenoiserConfig: steps must be positive");
  }
  bool operator==(const DenoiserConfig&) const = default;
};

/// Named parameter tensors. Order is fixed by construction and is the
/// serialization order.
struct DenoiserParams {
  DenoiserConfig config;
  std::vector<std::pair<std::string, Tensor>> tensors;

  Tensor& get(const std::string& name) {
    for (auto& [n, t] : tensors)
      if (n == name) return t;
    throw ContractViolation("DenoiserParams: no parameter named '" + name + "'");
  }
  const Tensor& get(const std::string& name) const { return const_cast<DenoiserParams*>(this)->get(name); }

  std::vector<Tensor> list() const {
    std::vector<Tensor> out;
    for (const auto& [n, t] : tensors) out.push_back(t);
    return out;
  }

  std::size_t parameter_count() const {
    std::size_t c = 0;
    for (const auto& [n, t] : tensors) c += t.numel();
    return c;
  }

  void zero_grad() {
    for (auto& [n, t] : tensors) t.zero_grad();
  }

  /// Deep copy with fresh leaf nodes.
  DenoiserParams clone() const {
    DenoiserParams p;
    p.config = config;
    for (const auto& [n, t] : tensors) p.tensors.push_back({n, t.detach().set_requires_grad(true)});
    return p;
  }
};

namespace denoiser_detail {

inline std::string layer_name(std::size_t l, const char* what) { return "layer" + std::to_string(l) + "." + what; }

}  // namespace denoiser_detail

/// Shapes of every parameter, in serialization order.
inline std::vector<std::pair<std::string, Shape>> parameter_shapes(const DenoiserConfig& c) {
  using denoiser_detail::layer_name;
  const std::size_t d = c.hidden, e = c.edge_dim, h = c.heads, te = 2 * DenoiserConfig::time_frequencies;
  const std::size_t in = c.feature_dim + StructuralFeatures::width, m = c.inter_hidden;
  std::vector<std::pair<std::string, Shape>> s{
      {"time.w1", {te, d}}, {"time.b1", {1, d}},   {"time.node", {d, d}},
      {"time.edge", {d, e}}, {"in.w", {in, d}},      {"in.b", {1, d}},
      {"edge_in.w", {2, e}}, {"edge_in.b", {1, e}},
  };
  for (std::size_t l = 0; l < c.layers; ++l) {
    for (auto [name, shape] : std::vector<std::pair<const char*, Shape>>{
             {"ln1.g", {1, d}}, {"ln1.b", {1, d}}, {"wq", {d, d}}, {"wk", {d, d}}, {"wv", {d, d}},
             {"wo", {d, d}}, {"edge_bias", {e, h}}, {"ln2.g", {1, d}}, {"ln2.b", {1, d}},
             {"ffn.w1", {d, c.ffn_mult * d}}, {"ffn.b1", {1, c.ffn_mult * d}},
             {"ffn.w2", {c.ffn_mult * d, d}}, {"ffn.b2", {1, d}}, {"edge_up.w", {e + h, e}},
             {"edge_up.b", {1, e}}, {"edge_ln.g", {1, e}}, {"edge_ln.b", {1, e}}})
      s.push_back({layer_name(l, name), shape});
  }
  for (auto& item : std::vector<std::pair<std::string, Shape>>{
           {"out.ln.g", {1, d}}, {"out.ln.b", {1, d}}, {"out.x.w", {d, c.feature_dim}},
           {"out.x.b", {1, c.feature_dim}}, {"out.a.w", {e, 1}}, {"out.a.b", {1, 1}},
           {"inter.in.w", {c.feature_dim + 2, m}}, {"inter.in.b", {1, m}},
           {"inter.mp0.self", {m, m}}, {"inter.mp0.nbr", {m, m}}, {"inter.mp0.b", {1, m}},
           {"inter.mp1.self", {m, m}}, {"inter.mp1.nbr", {m, m}}, {"inter.mp1.b", {1, m}},
           {"inter.bilinear", {m, m}}, {"inter.pair.u", {m, m}}, {"inter.pair.v", {m, m}},
           {"inter.pair.b", {1, m}}, {"inter.pair.out", {m, 1}}, {"inter.out.b", {1, 1}}})
    s.push_back(item);
  return s;
}

/// Random initialization: weights N(0, 1/fan_in), biases 0, norm gains 1.
inline DenoiserParams init_denoiser(const DenoiserConfig& config, std::uint64_t seed) {
  config.validate();
  Rng rng(seed);
  DenoiserParams p;
  p.config = config;
  for (const auto& [name, shape] : parameter_shapes(config)) {
    Tensor t;
    const bool is_gain = name.ends_with(".g");
    const bool is_bias = name.ends_with(".b") || name.ends_with(".b1") || name.ends_with(".b2");
    if (is_gain) {
      t = Tensor::ones(shape);
    } else if (is_bias) {
      t = Tensor::zeros(shape);
    } else {
      t = Tensor::randn(shape, rng, 1.0 / std::sqrt(static_cast<double>(std::max<std::size_t>(shape.rows, 1))));
    }
    p.tensors.push_back({name, t.set_requires_grad(true)});
  }
  return p;
}

/// Sinusoidal embedding of t/T: 16 frequencies, sin and cos, as a 1 x 32 row.
inline Tensor time_embedding(int t, int steps) {
  constexpr std::size_t nf = DenoiserConfig::time_frequencies;
  const double s = 1000.0 * static_cast<double>(t) / static_cast<double>(steps);
  std::vector<double> v(2 * nf);
  for (std::size_t k = 0; k < nf; ++k) {
    const double freq = std::exp(-std::log(10000.0) * static_cast<double>(k) / static_cast<double>(nf));
    v[k] = std::sin(s * freq);
    v[nf + k] = std::cos(s * freq);
  }
  return Tensor::from({1, 2 * nf}, std::move(v));
}

/// Output of one trunk pass over a block.
struct BlockPrediction {
  Tensor a;       // n x n, symmetric, zero diagonal
  Tensor x;       // n x F
  std::size_t n = 0;
};

/// Index helpers for pair-indexed (n^2 x c) tensors, shared across calls.
struct PairIndex {
  std::shared_ptr<const std::vector<std::size_t>> transpose;  // row (u,v) -> row (v,u)
  Tensor off_diagonal;                                         // n x n mask, 0 on the diagonal
  Tensor edge_input_diag;                                      // n^2 x 1, 1 on the diagonal

  static PairIndex make(std::size_t n) {
    PairIndex p;
    std::vector<std::size_t> tr(n * n);
    std::vector<double> mask(n * n, 1.0), diag(n * n, 0.0);
    for (std::size_t u = 0; u < n; ++u)
      for (std::size_t v = 0; v < n; ++v) tr[u * n + v] = v * n + u;
    for (std::size_t u = 0; u < n; ++u) {
      mask[u * n + u] = 0.0;
      diag[u * n + u] = 1.0;
    }
    p.transpose = std::make_shared<const std::vector<std::size_t>>(std::move(tr));
    p.off_diagonal = Tensor::from({n, n}, std::move(mask));
    p.edge_input_diag = Tensor::from({n * n, 1}, std::move(diag));
    return p;
  }
};

namespace denoiser_detail {

inline Tensor symmetrize_pairs(const Tensor& pairs, const PairIndex& idx) {
  return scale(add(pairs, gather_rows(pairs, idx.transpose)), 0.5);
}

inline Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) { return add(matmul(x, w), b); }

}  // namespace denoiser_detail

/// One trunk pass. Node tokens are a projection of [x, z] plus a projected
/// time embedding; the edge channel starts from [a_uv, 1{u = v}]. Each layer
/// runs multi-head attention whose logits carry a per-head bias read from the
/// edge channel, a feed-forward block, and an edge update from the
/// symmetrized attention logits.
inline BlockPrediction denoise_block(const AnalogGraphState& state, const StructuralFeatures& z, int t,
                                     const DenoiserParams& params) {
  using namespace denoiser_detail;
  const auto& c = params.config;
  const std::size_t n = state.n, d = c.hidden, h = c.heads, dk = d / h;
  require(state.feature_dim == c.feature_dim, "denoise_block: state has F=" + std::to_string(state.feature_dim) +
                                                  ", parameters expect F=" + std::to_string(c.feature_dim));
  require(z.n == n, "denoise_block: structural features cover " + std::to_string(z.n) + " nodes, state has " +
                        std::to_string(n));
  require(n >= 1, "denoise_block: empty block");
  auto P = [&](const std::string& name) -> const Tensor& { return params.get(name); };
  const PairIndex idx = PairIndex::make(n);

  const Tensor temb = gelu(linear(time_embedding(t, c.steps), P("time.w1"), P("time.b1")));
  const Tensor x_in = Tensor::from({n, c.feature_dim}, state.x);
  const Tensor z_in = Tensor::from({n, StructuralFeatures::width}, z.z);
  Tensor H = add(linear(concat({x_in, z_in}, 1), P("in.w"), P("in.b")), matmul(temb, P("time.node")));

  const Tensor a_flat = Tensor::from({n * n, 1}, state.a);
  Tensor E = add(linear(concat({a_flat, idx.edge_input_diag}, 1), P("edge_in.w"), P("edge_in.b")),
                 matmul(temb, P("time.edge")));

  const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(dk));
  for (std::size_t l = 0; l < c.layers; ++l) {
    auto L = [&](const char* what) -> const Tensor& { return P(layer_name(l, what)); };
    try {
      const Tensor hn = layer_norm(H, L("ln1.g"), L("ln1.b"));
      const Tensor q = matmul(hn, L("wq")), k = matmul(hn, L("wk")), v = matmul(hn, L("wv"));
      const Tensor bias = matmul(E, L("edge_bias"));  // n^2 x h
      std::vector<Tensor> head_out, head_logits;
      for (std::size_t j = 0; j < h; ++j) {
        const Tensor qj = slice(q, 1, j * dk, (j + 1) * dk);
        const Tensor kj = slice(k, 1, j * dk, (j + 1) * dk);
        const Tensor vj = slice(v, 1, j * dk, (j + 1) * dk);
        const Tensor logits = add(scale(matmul_nt(qj, kj), inv_sqrt_dk), reshape(slice(bias, 1, j, j + 1), n, n));
        head_out.push_back(matmul(softmax_rows(logits), vj));
        head_logits.push_back(reshape(logits, n * n, 1));
      }
      H = add(H, matmul(concat(head_out, 1), L("wo")));
      const Tensor hn2 = layer_norm(H, L("ln2.g"), L("ln2.b"));
      H = add(H, linear(gelu(linear(hn2, L("ffn.w1"), L("ffn.b1"))), L("ffn.w2"), L("ffn.b2")));

      const Tensor s_sym = symmetrize_pairs(concat(head_logits, 1), idx);
      const Tensor update = gelu(linear(concat({E, s_sym}, 1), L("edge_up.w"), L("edge_up.b")));
      E = layer_norm(add(E, update), L("edge_ln.g"), L("edge_ln.b"));
    } catch (const NumericFault& e) {
      throw NumericFault("denoise_block: layer " + std::to_string(l) + ": " + e.what());
    }
  }

  BlockPrediction out;
  out.n = n;
  out.x = linear(layer_norm(H, P("out.ln.g"), P("out.ln.b")), P("out.x.w"), P("out.x.b"));
  const Tensor a_pairs = symmetrize_pairs(linear(E, P("out.a.w"), P("out.a.b")), idx);
  out.a = mul(reshape(a_pairs, n, n), idx.off_diagonal);
  return out;
}

/// Convenience: the predicted clean state as plain values.
inline AnalogGraphState to_state(const BlockPrediction& p, std::size_t feature_dim, int t = 0) {
  AnalogGraphState s(p.n, feature_dim);
  const auto a = p.a.data();
  const auto x = p.x.data();
  s.a.assign(a.begin(), a.end());
  s.x.assign(x.begin(), x.end());
  s.t = t;
  return s;
}

/// Node embeddings of a predicted clean block from the inter-block encoder:
/// input [x_hat, normalized degree, 1] followed by two message-passing
/// rounds over the soft adjacency W = (a_hat + 1) / 2 with zero diagonal.
inline Tensor encode_block(const BlockPrediction& block, const DenoiserParams& params) {
  using denoiser_detail::linear;
  const std::size_t n = block.n;
  auto P = [&](const std::string& name) -> const Tensor& { return params.get(name); };
  std::vector<double> mask(n * n, 1.0);
  for (std::size_t u = 0; u < n; ++u) mask[u * n + u] = 0.0;
  const double inv_n = n > 1 ? 1.0 / static_cast<double>(n - 1) : 0.0;
  const Tensor w = mul(shift(scale(block.a, 0.5), 0.5), Tensor::from({n, n}, std::move(mask)));
  const Tensor deg = scale(matmul(w, Tensor::ones({n, 1})), inv_n);
  Tensor hdn = gelu(linear(concat({block.x, deg, Tensor::ones({n, 1})}, 1), P("inter.in.w"), P("inter.in.b")));
  for (int r = 0; r < 2; ++r) {
    const std::string pre = "inter.mp" + std::to_string(r);
    const Tensor msg = scale(matmul(w, hdn), inv_n);
    hdn = gelu(add(add(matmul(hdn, P(pre + ".self")), matmul(msg, P(pre + ".nbr"))), P(pre + ".b")));
  }
  return hdn;
}

/// Inter-block logits |V_i| x |V_j|:
///   logit(u, v) = h_u^T M h_v + (g(h_u, h_v) + g(h_v, h_u)) / 2
/// with M = (W + W^T)/2 and g(p, q) = w_out^T gelu(U p + V q + b), so that
/// exchanging the blocks transposes the result.
inline Tensor predict_interblock(const Tensor& hi, const Tensor& hj, const DenoiserParams& params) {
  require(hi.cols() == params.config.inter_hidden && hj.cols() == params.config.inter_hidden,
          "predict_interblock: embedding widths " + hi.shape().str() + " and " + hj.shape().str() +
              " do not match inter_hidden=" + std::to_string(params.config.inter_hidden));
  auto P = [&](const std::string& name) -> const Tensor& { return params.get(name); };
  const std::size_t ni = hi.rows(), nj = hj.rows();
  const Tensor& wb = P("inter.bilinear");
  const Tensor m = scale(add(wb, transpose(wb)), 0.5);
  const Tensor bil = matmul_nt(matmul(hi, m), hj);

  std::vector<std::size_t> ru(ni * nj), rv(ni * nj);
  for (std::size_t u = 0; u < ni; ++u)
    for (std::size_t v = 0; v < nj; ++v) {
      ru[u * nj + v] = u;
      rv[u * nj + v] = v;
    }
  const auto iu = std::make_shared<const std::vector<std::size_t>>(std::move(ru));
  const auto iv = std::make_shared<const std::vector<std::size_t>>(std::move(rv));
  const Tensor &U = P("inter.pair.u"), &V = P("inter.pair.v"), &b = P("inter.pair.b");
  const Tensor iu_u = gather_rows(matmul(hi, U), iu), iu_v = gather_rows(matmul(hi, V), iu);
  const Tensor jv_u = gather_rows(matmul(hj, U), iv), jv_v = gather_rows(matmul(hj, V), iv);
  const Tensor g1 = gelu(add(add(iu_u, jv_v), b));
  const Tensor g2 = gelu(add(add(jv_u, iu_v), b));
  const Tensor pair = scale(matmul(add(g1, g2), P("inter.pair.out")), 0.5);
  return add(add(bil, reshape(pair, ni, nj)), P("inter.out.b"));
}

}  // namespace sbgd
