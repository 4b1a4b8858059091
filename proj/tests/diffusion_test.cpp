#include <gtest/gtest.h>

#include <cmath>

#include "sbgd/datagen.hpp"
#include "sbgd/diffusion.hpp"

using namespace sbgd;

TEST(Schedule, GammaStartsAtOneAndDecreases) {
  for (auto kind : {ScheduleKind::linear, ScheduleKind::cosine})
    for (int T : {50, 100, 200}) {
      auto s = make_schedule(kind, T);
      EXPECT_EQ(s.gamma_at(0), 1.0);
      for (int t = 1; t <= T; ++t) {
        EXPECT_LT(s.gamma_at(t), s.gamma_at(t - 1));
        EXPECT_GT(s.beta_at(t), 0.0);
        EXPECT_LT(s.beta_at(t), 1.0);
      }
      EXPECT_LT(s.gamma_at(T), 0.05);
    }
}

TEST(Schedule, ZeroStepsRejected) { EXPECT_THROW(make_schedule(ScheduleKind::linear, 0), ContractViolation); }

TEST(Schedule, LinearRegressionConstant) {
  auto s = make_schedule(ScheduleKind::linear, 100);
  double g = 1.0;
  for (int t = 1; t <= 100; ++t) g *= 1.0 - s.beta_at(t);
  EXPECT_DOUBLE_EQ(s.gamma_at(100), g);
  EXPECT_NEAR(s.gamma_at(100), 2.039008976e-05, 1e-13);
}

TEST(Analog, EncodeDecode) {
  auto g = gen_er(12, 0.4, 2);
  auto s = encode_analog(g);
  for (std::size_t u = 0; u < 12; ++u)
    for (std::size_t v = 0; v < 12; ++v)
      EXPECT_EQ(s.edge(u, v), u == v ? 0.0 : (g.has_edge(u, v) ? 1.0 : -1.0));
  EXPECT_EQ(decode_analog(s), g);
  EXPECT_EQ(decode_analog(AnalogGraphState(5, 0)).edge_count(), 0u);
}

TEST(Analog, SmallPerturbationKeepsGraph) {
  auto g = gen_er(15, 0.5, 3);
  auto s = encode_analog(g);
  Rng rng(1);
  for (std::size_t u = 0; u < 15; ++u)
    for (std::size_t v = u + 1; v < 15; ++v) {
      const double d = rng.uniform(-0.99, 0.99);
      s.edge(u, v) += d;
      s.edge(v, u) += d;
    }
  EXPECT_EQ(decode_analog(s), g);
}

TEST(Forward, ZeroNoiseScales) {
  auto sched = make_schedule(ScheduleKind::cosine, 50);
  auto s0 = encode_analog(gen_er(6, 0.5, 1));
  auto st = forward_corrupt(s0, 20, StateNoise::zeros(6, 0), sched);
  for (std::size_t i = 0; i < s0.a.size(); ++i) EXPECT_DOUBLE_EQ(st.a[i], std::sqrt(sched.gamma_at(20)) * s0.a[i]);
  auto id = forward_corrupt(s0, 0, StateNoise::zeros(6, 0), sched);
  EXPECT_EQ(id.a, s0.a);
}

TEST(Forward, RangeChecked) {
  auto sched = make_schedule(ScheduleKind::cosine, 10);
  auto s0 = AnalogGraphState(3, 0);
  EXPECT_THROW(forward_corrupt(s0, 11, StateNoise::zeros(3, 0), sched), ContractViolation);
}

TEST(Forward, SymmetryPreserved) {
  auto sched = make_schedule(ScheduleKind::linear, 50);
  Rng rng(4);
  auto s = encode_analog(gen_er(9, 0.3, 1));
  for (int t = 1; t <= 50; ++t) {
    s = forward_step(s, t, StateNoise::sample(9, 0, rng), sched);
    ASSERT_TRUE(s.is_symmetric_zero_diag());
  }
}

TEST(Forward, VariancePreservedForUnitData) {
  auto sched = make_schedule(ScheduleKind::cosine, 50);
  Rng rng(8);
  const int draws = 100000;
  for (int t : {5, 25, 50}) {
    double s1 = 0, s2 = 0;
    for (int i = 0; i < draws; ++i) {
      AnalogGraphState x0(1, 1);
      x0.x[0] = rng.normal();
      StateNoise e = StateNoise::zeros(1, 1);
      e.x[0] = rng.normal();
      const double v = forward_corrupt(x0, t, e, sched).x[0];
      s1 += v;
      s2 += v * v;
    }
    const double var = s2 / draws - (s1 / draws) * (s1 / draws);
    EXPECT_NEAR(var, 1.0, 0.02);
  }
}

TEST(Ddpm, TerminalStepIsPosteriorMean) {
  auto sched = make_schedule(ScheduleKind::cosine, 4);
  Rng rng(2);
  auto xt = gaussian_state(5, 2, 1, rng);
  auto x0 = encode_analog(gen_er(5, 0.5, 3));
  x0.x.assign(10, 0.3);
  x0.feature_dim = 2;
  auto c = posterior_coefficients(1, sched);
  auto out = ddpm_step(xt, x0, 1, sched, StateNoise::sample(5, 2, rng));
  for (std::size_t i = 0; i < out.x.size(); ++i) EXPECT_DOUBLE_EQ(out.x[i], c.c0 * x0.x[i] + c.ct * xt.x[i]);
}

TEST(Ddpm, PosteriorClosedFormT4) {
  auto sched = make_schedule(ScheduleKind::linear, 4);
  for (int t = 1; t <= 4; ++t) {
    const double b = sched.beta_at(t), a = 1 - b;
    double g = 1, gp = 1;
    for (int s = 1; s <= t; ++s) g *= 1 - sched.beta_at(s);
    for (int s = 1; s < t; ++s) gp *= 1 - sched.beta_at(s);
    auto c = posterior_coefficients(t, sched);
    EXPECT_NEAR(c.c0, std::sqrt(gp) * b / (1 - g), 1e-12);
    EXPECT_NEAR(c.ct, std::sqrt(a) * (1 - gp) / (1 - g), 1e-12);
    EXPECT_NEAR(c.var, b * (1 - gp) / (1 - g), 1e-12);
  }
}

TEST(Ddpm, SymmetryPreserved) {
  auto sched = make_schedule(ScheduleKind::cosine, 20);
  Rng rng(5);
  auto s = gaussian_state(7, 1, 20, rng);
  auto pred = encode_analog(gen_er(7, 0.5, 1));
  pred.x.assign(7, 0.0);
  pred.feature_dim = 1;
  for (int t = 20; t >= 1; --t) {
    s = ddpm_step(s, pred, t, sched, StateNoise::sample(7, 1, rng));
    ASSERT_TRUE(s.is_symmetric_zero_diag(1e-12));
  }
}

TEST(Ddim, FinalStepReturnsPrediction) {
  auto sched = make_schedule(ScheduleKind::cosine, 10);
  Rng rng(3);
  auto s = gaussian_state(4, 2, 10, rng);
  auto pred = gaussian_state(4, 2, 0, rng);
  auto out = ddim_step(s, pred, 10, 0, sched);
  EXPECT_EQ(out.a, pred.a);
  EXPECT_EQ(out.x, pred.x);
}

TEST(Ddim, PerfectPredictionFollowsForwardTrajectory) {
  auto sched = make_schedule(ScheduleKind::cosine, 30);
  Rng rng(6);
  auto x0 = encode_analog(gen_er(6, 0.5, 2));
  auto eps = StateNoise::sample(6, 0, rng);
  auto xt = forward_corrupt(x0, 30, eps, sched);
  auto out = ddim_step(xt, x0, 30, 12, sched);
  auto expect = forward_corrupt(x0, 12, eps, sched);
  for (std::size_t i = 0; i < out.a.size(); ++i) EXPECT_NEAR(out.a[i], expect.a[i], 1e-10);
}

TEST(Ddim, HalfStridesMatchFullStride) {
  auto sched = make_schedule(ScheduleKind::linear, 50);
  Rng rng(7);
  auto xt = gaussian_state(6, 3, 40, rng);
  auto pred = gaussian_state(6, 3, 0, rng);
  auto half = ddim_step(ddim_step(xt, pred, 40, 25, sched), pred, 25, 10, sched);
  auto full = ddim_step(xt, pred, 40, 10, sched);
  for (std::size_t i = 0; i < full.a.size(); ++i) EXPECT_NEAR(half.a[i], full.a[i], 1e-10);
  for (std::size_t i = 0; i < full.x.size(); ++i) EXPECT_NEAR(half.x[i], full.x[i], 1e-10);
}

TEST(Marginal, ComposedStepsMatchClosedForm) {
  auto sched = make_schedule(ScheduleKind::cosine, 20);
  Rng rng(12);
  const int draws = 100000, t = 12;
  const double x0 = 1.0;
  double s1 = 0, s2 = 0;
  for (int i = 0; i < draws; ++i) {
    AnalogGraphState s(1, 1);
    s.x[0] = x0;
    for (int k = 1; k <= t; ++k) {
      StateNoise e = StateNoise::zeros(1, 1);
      e.x[0] = rng.normal();
      s = forward_step(s, k, e, sched);
    }
    s1 += s.x[0];
    s2 += s.x[0] * s.x[0];
  }
  const double mean = s1 / draws, var = s2 / draws - mean * mean;
  EXPECT_NEAR(mean / (std::sqrt(sched.gamma_at(t)) * x0), 1.0, 0.02);
  EXPECT_NEAR(var / (1 - sched.gamma_at(t)), 1.0, 0.02);
}
