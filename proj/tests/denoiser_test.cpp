#include <gtest/gtest.h>

#include <cmath>

#include "gradcheck.hpp"
#include "sbgd/datagen.hpp"
#include "sbgd/denoiser.hpp"
#include "sbgd/features.hpp"
#include "sbgd/trainer.hpp"
#include "test_util.hpp"

using namespace sbgd;
using sbgd::testing::permute_state;
using sbgd::testing::random_permutation;

namespace {

DenoiserConfig small_config(std::size_t f) {
  DenoiserConfig c;
  c.feature_dim = f;
  c.hidden = 8;
  c.heads = 2;
  c.layers = 2;
  c.edge_dim = 4;
  c.inter_hidden = 6;
  c.steps = 20;
  return c;
}

Graph complete(std::size_t n) {
  Graph g(n, 0);
  for (std::size_t u = 0; u < n; ++u)
    for (std::size_t v = u + 1; v < n; ++v) g.add_edge(u, v);
  return g;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  double m = 0;
  for (std::size_t i = 0; i < a.numel(); ++i) m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
  return m;
}

}  // namespace

TEST(Features, TriangleCleanGraph) {
  auto z = extract_features(encode_analog(complete(3)));
  for (std::size_t v = 0; v < 3; ++v) {
    EXPECT_NEAR(z.at(v, 0), 1.0, 1e-15);
    EXPECT_NEAR(z.at(v, 1), 1.0, 1e-15);
  }
}

TEST(Features, K2LaplacianSpectrum) {
  auto s = encode_analog(complete(2));
  auto eig = linalg::jacobi_eigen(normalized_laplacian(state_weights(s), 2));
  EXPECT_NEAR(eig.values[0], 0.0, 1e-12);
  EXPECT_NEAR(eig.values[1], 2.0, 1e-12);
}

TEST(Features, P3SpectrumAndDegrees) {
  Graph g(3, 0);
  g.add_edge(0, 1);
  g.add_edge(1, 2);
  auto s = encode_analog(g);
  auto eig = linalg::jacobi_eigen(normalized_laplacian(state_weights(s), 3));
  EXPECT_NEAR(eig.values[0], 0.0, 1e-12);
  EXPECT_NEAR(eig.values[1], 1.0, 1e-12);
  EXPECT_NEAR(eig.values[2], 2.0, 1e-12);
  auto z = extract_features(s);
  EXPECT_NEAR(z.at(1, 0), 2.0 * z.at(0, 0), 1e-15);
  EXPECT_NEAR(z.at(1, 0), 2.0 * z.at(2, 0), 1e-15);
}

TEST(Features, FiniteAndPaddedForTinyBlocks) {
  Rng rng(1);
  for (std::size_t n : {1, 2, 3, 5, 9}) {
    auto s = gaussian_state(n, 0, 3, rng);
    auto z = extract_features(s);
    ASSERT_EQ(z.z.size(), n * StructuralFeatures::width);
    for (double v : z.z) EXPECT_TRUE(std::isfinite(v));
    for (std::size_t v = 0; v < n; ++v)
      for (std::size_t j = n > 0 ? n - 1 : 0; j < StructuralFeatures::spectral_dim; ++j) EXPECT_EQ(z.at(v, 2 + j), 0.0);
  }
}

TEST(Denoiser, OutputShapesAndSymmetry) {
  auto params = init_denoiser(small_config(3), 1);
  Rng rng(2);
  for (std::size_t n : {1, 2, 5, 11}) {
    auto s = gaussian_state(n, 3, 7, rng);
    auto out = denoise_block(s, extract_features(s), 7, params);
    ASSERT_EQ(out.a.shape(), (Shape{n, n}));
    ASSERT_EQ(out.x.shape(), (Shape{n, 3}));
    for (std::size_t u = 0; u < n; ++u) {
      EXPECT_EQ(out.a.at(u, u), 0.0);
      for (std::size_t v = 0; v < n; ++v) EXPECT_EQ(out.a.at(u, v), out.a.at(v, u));
    }
  }
}

TEST(Denoiser, ZeroFeatureWidth) {
  auto params = init_denoiser(small_config(0), 1);
  Rng rng(3);
  auto s = gaussian_state(6, 0, 4, rng);
  auto out = denoise_block(s, extract_features(s), 4, params);
  EXPECT_EQ(out.x.shape(), (Shape{6, 0}));
}

TEST(Denoiser, Deterministic) {
  auto params = init_denoiser(small_config(2), 5);
  Rng rng(4);
  auto s = gaussian_state(7, 2, 9, rng);
  auto z = extract_features(s);
  auto a = denoise_block(s, z, 9, params), b = denoise_block(s, z, 9, params);
  EXPECT_EQ(max_abs_diff(a.a, b.a), 0.0);
  EXPECT_EQ(max_abs_diff(a.x, b.x), 0.0);
}

TEST(Denoiser, PermutationEquivariance) {
  DenoiserConfig c;
  c.feature_dim = 4;
  c.steps = 50;
  auto params = init_denoiser(c, 7);
  Rng rng(8);
  for (int rep = 0; rep < 10; ++rep) {
    const std::size_t n = 4 + rng.below(13);
    auto s = gaussian_state(n, 4, 30, rng);
    auto perm = random_permutation(n, rng);
    auto ps = permute_state(s, perm);
    auto out = denoise_block(s, extract_features(s), 30, params);
    auto pout = denoise_block(ps, extract_features(ps), 30, params);
    for (std::size_t u = 0; u < n; ++u) {
      for (std::size_t v = 0; v < n; ++v) EXPECT_NEAR(pout.a.at(perm[u], perm[v]), out.a.at(u, v), 1e-8);
      for (std::size_t k = 0; k < 4; ++k) EXPECT_NEAR(pout.x.at(perm[u], k), out.x.at(u, k), 1e-8);
    }
  }
}

TEST(Interblock, ShapeAndExchangeSymmetry) {
  auto params = init_denoiser(small_config(2), 9);
  Rng rng(10);
  auto si = gaussian_state(5, 2, 3, rng), sj = gaussian_state(8, 2, 3, rng);
  auto pi = denoise_block(si, extract_features(si), 3, params);
  auto pj = denoise_block(sj, extract_features(sj), 3, params);
  auto hi = encode_block(pi, params), hj = encode_block(pj, params);
  auto lij = predict_interblock(hi, hj, params);
  auto lji = predict_interblock(hj, hi, params);
  ASSERT_EQ(lij.shape(), (Shape{5, 8}));
  for (std::size_t u = 0; u < 5; ++u)
    for (std::size_t v = 0; v < 8; ++v) EXPECT_NEAR(lij.at(u, v), lji.at(v, u), 1e-8);
  auto twin = predict_interblock(hi, hi, params);
  for (std::size_t u = 0; u < 5; ++u)
    for (std::size_t v = 0; v < 5; ++v) EXPECT_NEAR(twin.at(u, v), twin.at(v, u), 1e-8);
  EXPECT_THROW(predict_interblock(Tensor::zeros({3, 2}), hj, params), ContractViolation);
}

TEST(Denoiser, ParameterCountIsPureFunction) {
  auto a = init_denoiser(small_config(3), 1), b = init_denoiser(small_config(3), 99);
  EXPECT_EQ(a.parameter_count(), b.parameter_count());
  auto c = small_config(3);
  c.hidden = 9;
  EXPECT_THROW(init_denoiser(c, 1), ContractViolation);
}

namespace {

struct LossFixture {
  DecompositionCache cache;
  TrainConfig config;
  NoiseSchedule sched;

  LossFixture() {
    CsbmSpec s;
    s.n = 10;
    s.feature_dim = 2;
    s.p_in = 0.6;
    s.p_out = 0.2;
    config.block_size = 5;
    config.diffusion_steps = 20;
    cache = build_decomposition_cache({gen_csbm(s)}, config);
    sched = make_schedule(ScheduleKind::cosine, 20);
  }

  PairLoss loss(const DenoiserParams& params, std::uint64_t seed) const {
    Rng rng(seed);
    auto pair = draw_pair(cache, rng);
    return pair_loss(pair, params, sched, config, rng);
  }
};

}  // namespace

TEST(Denoiser, EveryParameterReceivesGradient) {
  LossFixture fx;
  auto params = init_denoiser(small_config(2), 3);
  backward(fx.loss(params, 4).total);
  for (const auto& [name, t] : params.tensors) {
    double norm = 0;
    for (double g : t.grad()) norm += g * g;
    EXPECT_GT(norm, 0.0) << name;
  }
}

TEST(Gradcheck, FullDenoiserLoss) {
  LossFixture fx;
  auto params = init_denoiser(small_config(2), 11);
  auto loss_of = [&](const std::vector<Tensor>&) { return fx.loss(params, 21).total; };
  auto r = sbgd::testing::gradcheck(loss_of, params.list());
  EXPECT_LE(r.max_rel_error, 1e-4);
  EXPECT_EQ(r.checked, params.parameter_count());
}
