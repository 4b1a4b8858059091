#include <gtest/gtest.h>

#include <cmath>

#include "gradcheck.hpp"
#include "sbgd/memory.hpp"
#include "sbgd/optim.hpp"
#include "sbgd/rng.hpp"
#include "sbgd/tensor.hpp"

using namespace sbgd;
using sbgd::testing::gradcheck;

namespace {

Tensor rand_in(Shape s, Rng& rng) { return Tensor::uniform(s, rng, -2.0, 2.0); }

// Weighted sum so that every output entry gets a distinct upstream gradient.
Tensor probe(const Tensor& t) {
  std::vector<double> w(t.numel());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = std::sin(1.0 + 0.7 * static_cast<double>(i));
  return sum(mul(t, Tensor::from(t.shape(), w)));
}

}  // namespace

TEST(Tensor, MatmulShapeRule) {
  Rng rng(1);
  auto c = matmul(Tensor::randn({2, 3}, rng), Tensor::randn({3, 4}, rng));
  EXPECT_EQ(c.shape(), (Shape{2, 4}));
  EXPECT_THROW(matmul(Tensor::zeros({2, 3}), Tensor::zeros({2, 3})), ContractViolation);
}

TEST(Tensor, ShapeMismatchNamesBothShapes) {
  try {
    add(Tensor::zeros({2, 3}), Tensor::zeros({3, 2}));
    FAIL();
  } catch (const ContractViolation& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("[2x3]"), std::string::npos);
    EXPECT_NE(msg.find("[3x2]"), std::string::npos);
  }
}

TEST(Tensor, SoftmaxRowsSumToOne) {
  Rng rng(2);
  auto s = softmax_rows(Tensor::randn({5, 7}, rng, 10.0));
  for (std::size_t r = 0; r < 5; ++r) {
    double t = 0;
    for (std::size_t c = 0; c < 7; ++c) t += s.at(r, c);
    EXPECT_NEAR(t, 1.0, 1e-12);
  }
}

TEST(Tensor, MseOfIdenticalIsZero) {
  Rng rng(3);
  auto x = Tensor::randn({4, 4}, rng);
  EXPECT_EQ(mse_loss(x, x).item(), 0.0);
}

TEST(Tensor, NanIsNumericFault) {
  auto x = Tensor::from({1, 2}, {1.0, -1.0});
  EXPECT_THROW(scale(x, std::numeric_limits<double>::infinity()), NumericFault);
}

TEST(Autodiff, SquareAtThree) {
  auto x = Tensor::scalar(3.0).set_requires_grad(true);
  backward(mul(x, x));
  EXPECT_DOUBLE_EQ(x.grad()[0], 6.0);
}

TEST(Autodiff, FanOutAccumulates) {
  auto w = Tensor::scalar(2.0).set_requires_grad(true);
  auto y = add(scale(w, 3.0), mul(w, w));  // 3w + w^2 -> 3 + 2w
  backward(y);
  EXPECT_DOUBLE_EQ(w.grad()[0], 7.0);
}

TEST(Autodiff, NonScalarLossRejected) {
  auto x = Tensor::zeros({2, 2}).set_requires_grad(true);
  EXPECT_THROW(backward(x), ContractViolation);
}

TEST(Autodiff, UnreachableParameterGetsZero) {
  auto a = Tensor::scalar(1.0).set_requires_grad(true);
  auto b = Tensor::scalar(1.0).set_requires_grad(true);
  backward(mul(a, a));
  EXPECT_EQ(b.grad()[0], 0.0);
}

TEST(Gradcheck, EveryPrimitive) {
  Rng rng(11);
  for (int rep = 0; rep < 20; ++rep) {
    std::vector<std::pair<const char*, double>> errs;
    auto check = [&](const char* name, auto f, std::vector<Tensor> in) {
      errs.push_back({name, gradcheck(f, std::move(in)).max_rel_error});
    };
    using V = const std::vector<Tensor>&;
    check("add", [](V v) { return probe(add(v[0], v[1])); }, {rand_in({3, 4}, rng), rand_in({1, 4}, rng)});
    check("sub", [](V v) { return probe(sub(v[0], v[1])); }, {rand_in({3, 4}, rng), rand_in({3, 1}, rng)});
    check("mul", [](V v) { return probe(mul(v[0], v[1])); }, {rand_in({3, 4}, rng), rand_in({3, 4}, rng)});
    check("matmul", [](V v) { return probe(matmul(v[0], v[1])); }, {rand_in({3, 5}, rng), rand_in({5, 2}, rng)});
    check("matmul_nt", [](V v) { return probe(matmul_nt(v[0], v[1])); },
          {rand_in({3, 5}, rng), rand_in({4, 5}, rng)});
    check("transpose", [](V v) { return probe(transpose(v[0])); }, {rand_in({3, 5}, rng)});
    check("reshape", [](V v) { return probe(reshape(v[0], 5, 3)); }, {rand_in({3, 5}, rng)});
    check("softmax", [](V v) { return probe(softmax_rows(v[0])); }, {rand_in({3, 5}, rng)});
    check("relu", [](V v) { return probe(relu(v[0])); }, {rand_in({3, 5}, rng)});
    check("gelu", [](V v) { return probe(gelu(v[0])); }, {rand_in({3, 5}, rng)});
    check("sigmoid", [](V v) { return probe(sigmoid(v[0])); }, {rand_in({3, 5}, rng)});
    check("layer_norm", [](V v) { return probe(layer_norm(v[0], v[1], v[2])); },
          {rand_in({3, 6}, rng), rand_in({1, 6}, rng), rand_in({1, 6}, rng)});
    check("concat0", [](V v) { return probe(concat({v[0], v[1]}, 0)); }, {rand_in({2, 3}, rng), rand_in({4, 3}, rng)});
    check("concat1", [](V v) { return probe(concat({v[0], v[1]}, 1)); }, {rand_in({2, 3}, rng), rand_in({2, 2}, rng)});
    check("slice0", [](V v) { return probe(slice(v[0], 0, 1, 3)); }, {rand_in({4, 3}, rng)});
    check("slice1", [](V v) { return probe(slice(v[0], 1, 1, 3)); }, {rand_in({4, 3}, rng)});
    check("gather", [](V v) {
            static const auto idx = std::make_shared<const std::vector<std::size_t>>(std::vector<std::size_t>{2, 0, 2, 1});
            return probe(gather_rows(v[0], idx));
          }, {rand_in({3, 4}, rng)});
    check("sum", [](V v) { return scale(sum(v[0]), 1.3); }, {rand_in({3, 4}, rng)});
    check("mean", [](V v) { return scale(mean(mul(v[0], v[0])), 1.3); }, {rand_in({3, 4}, rng)});
    check("scale_shift", [](V v) { return probe(shift(scale(v[0], -1.7), 0.4)); }, {rand_in({3, 4}, rng)});
    check("mse", [](V v) { return mse_loss(v[0], v[1]); }, {rand_in({3, 4}, rng), rand_in({3, 4}, rng)});
    for (auto [name, e] : errs) EXPECT_LE(e, 1e-4) << name << " rep " << rep;
  }
}

TEST(Autodiff, DeterministicAcrossRuns) {
  auto run = [] {
    Rng rng(5);
    auto a = Tensor::randn({4, 4}, rng);
    auto b = Tensor::randn({4, 4}, rng);
    return sum(gelu(matmul(a, b))).item();
  };
  EXPECT_EQ(run(), run());
}

TEST(Adam, ZeroGradientLeavesParamsUnchanged) {
  Rng rng(1);
  std::vector<Tensor> params{Tensor::randn({2, 3}, rng).set_requires_grad(true)};
  const auto before = std::vector<double>(params[0].data().begin(), params[0].data().end());
  auto st = OptimizerState::for_params(params, {0.1});
  for (int i = 0; i < 5; ++i) {
    params[0].zero_grad();
    for (auto& g : params[0].grad_mut()) g = 0.0;
    adam_step(params, st);
  }
  EXPECT_EQ(std::vector<double>(params[0].data().begin(), params[0].data().end()), before);
  EXPECT_EQ(st.step, 5);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  std::vector<Tensor> params{Tensor::from({1, 3}, {0.0, 1.0, -1.0}).set_requires_grad(true)};
  auto st = OptimizerState::for_params(params, {0.05});
  const std::vector<double> g{0.3, -2.0, 7.0};
  for (std::size_t i = 0; i < 3; ++i) params[0].grad_mut()[i] = g[i];
  adam_step(params, st);
  EXPECT_NEAR(params[0].at(0, 0), -0.05, 1e-6);
  EXPECT_NEAR(params[0].at(0, 1), 1.05, 1e-6);
  EXPECT_NEAR(params[0].at(0, 2), -1.05, 1e-6);
}

TEST(Adam, MomentsFollowHandComputation) {
  std::vector<Tensor> params{Tensor::scalar(0.0).set_requires_grad(true)};
  auto st = OptimizerState::for_params(params, {0.01});
  const double gs[3] = {1.0, -2.0, 0.5};
  double m = 0, v = 0;
  for (double g : gs) {
    params[0].zero_grad();
    params[0].grad_mut()[0] = g;
    adam_step(params, st);
    m = 0.9 * m + 0.1 * g;
    v = 0.999 * v + 0.001 * g * g;
  }
  EXPECT_NEAR(st.first_moment[0][0], m, 1e-15);
  EXPECT_NEAR(st.second_moment[0][0], v, 1e-15);
}

TEST(Adam, ShapeMismatchRejected) {
  std::vector<Tensor> params{Tensor::zeros({2, 2}).set_requires_grad(true)};
  auto st = OptimizerState::for_params(params);
  params[0] = Tensor::zeros({3, 2}).set_requires_grad(true);
  EXPECT_THROW(adam_step(params, st), ContractViolation);
}

TEST(Memory, ScopeSeesAllocation) {
  MemoryScope scope("t");
  auto t = Tensor::zeros({10, 10});
  EXPECT_GE(scope.peak() - scope.snapshot().at_entry, 100);
}

TEST(Memory, SequentialAllocationsDoNotStack) {
  MemoryScope scope("seq");
  const auto base = scope.snapshot().at_entry;
  { auto a = Tensor::zeros({10, 10}); }
  { auto b = Tensor::zeros({10, 10}); }
  EXPECT_EQ(scope.peak() - base, 100);
}

TEST(Memory, NestedInnerPeakBelowOuter) {
  MemoryScope outer("outer");
  auto keep = Tensor::zeros({5, 5});
  std::int64_t inner_peak = 0;
  {
    MemoryScope inner("inner");
    auto t = Tensor::zeros({7, 7});
    inner_peak = inner.peak();
  }
  EXPECT_LE(inner_peak, outer.peak());
  EXPECT_GE(outer.peak() - outer.snapshot().at_entry, 25 + 49);
}

TEST(Memory, DisablingChangesNoNumbers) {
  auto run = [] {
    Rng rng(9);
    auto a = Tensor::randn({6, 6}, rng).set_requires_grad(true);
    auto l = sum(softmax_rows(matmul(a, a)));
    backward(l);
    return std::make_pair(l.item(), a.grad());
  };
  auto on = run();
  MemoryMeter::local().set_enabled(false);
  auto off = run();
  MemoryMeter::local().set_enabled(true);
  EXPECT_EQ(on, off);
}

TEST(Memory, PeakNeverDecreasesInScope) {
  MemoryScope s("mono");
  std::int64_t last = s.peak();
  Rng rng(4);
  for (int i = 0; i < 20; ++i) {
    auto t = Tensor::randn({static_cast<std::size_t>(1 + i % 5), 8}, rng);
    EXPECT_GE(s.peak(), last);
    last = s.peak();
  }
}
