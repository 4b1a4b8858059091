#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "errors.hpp"
#include "graph.hpp"
#include "rng.hpp"

namespace sbgd {

enum class ScheduleKind { linear, cosine };

inline std::string to_string(ScheduleKind k) { return k == ScheduleKind::linear ? "linear" : "cosine"; }

inline ScheduleKind schedule_kind_from(const std::string& s) {
  if (s == "linear") return ScheduleKind::linear;
  if (s == "cosine") return ScheduleKind::cosine;
  throw ContractViolation("unknown schedule kind '" + s + "' (expected linear or cosine)");
}

/// Variance schedule. Index 0 of beta/alpha is unused; gamma[0] = 1 and
/// gamma[t] = prod_{s<=t} alpha[s] is the cumulative signal fraction.
struct NoiseSchedule {
  ScheduleKind kind = ScheduleKind::cosine;
  int steps = 0;
  std::vector<double> beta;
  std::vector<double> alpha;
  std::vector<double> gamma;

  double beta_at(int t) const { return beta.at(static_cast<std::size_t>(t)); }
  double alpha_at(int t) const { return alpha.at(static_cast<std::size_t>(t)); }
  double gamma_at(int t) const { return gamma.at(static_cast<std::size_t>(t)); }
};

/// Builds a schedule with T steps.
///
/// linear: beta ramps from 1e-4 * (1000/T) to 0.02 * (1000/T); the usual
/// 1e-4 -> 0.02 ramp is defined for T = 1000 and the rescaling keeps the total
/// corruption comparable for short chains (gamma[T] < 0.05 for T >= 50).
/// cosine: gamma(t) = cos^2(((t/T + s)/(1 + s)) pi/2) / cos^2(s pi/2), s = 0.008,
/// with betas derived from consecutive ratios and clipped to [1e-6, 0.999].
inline NoiseSchedule make_schedule(ScheduleKind kind, int steps) {
  if (steps < 1) throw ContractViolation("make_schedule: T must be >= 1, got " + std::to_string(steps));
  NoiseSchedule s;
  s.kind = kind;
  s.steps = steps;
  const auto n = static_cast<std::size_t>(steps) + 1;
  s.beta.assign(n, 0.0);
  s.alpha.assign(n, 1.0);
  s.gamma.assign(n, 1.0);
  const double T = static_cast<double>(steps);
  if (kind == ScheduleKind::linear) {
    const double scale = 1000.0 / T;
    const double lo = 1e-4 * scale, hi = 0.02 * scale;
    for (int t = 1; t <= steps; ++t) {
      const double frac = steps == 1 ? 0.0 : static_cast<double>(t - 1) / (T - 1.0);
      s.beta[static_cast<std::size_t>(t)] = std::min(lo + (hi - lo) * frac, 0.999);
    }
  } else {
    constexpr double offset = 0.008;
    auto f = [&](double t) {
      const double c = std::cos((t / T + offset) / (1.0 + offset) * std::numbers::pi / 2.0);
      return c * c;
    };
    const double f0 = f(0.0);
    for (int t = 1; t <= steps; ++t) {
      const double g_prev = f(t - 1.0) / f0;
      const double g_cur = f(static_cast<double>(t)) / f0;
      s.beta[static_cast<std::size_t>(t)] = std::clamp(1.0 - g_cur / g_prev, 1e-6, 0.999);
    }
  }
  for (int t = 1; t <= steps; ++t) {
    const auto i = static_cast<std::size_t>(t);
    s.alpha[i] = 1.0 - s.beta[i];
    s.gamma[i] = s.gamma[i - 1] * s.alpha[i];
  }
  return s;
}

/// Continuous diffusion state of one block: analog structure channel
/// (symmetric, zero diagonal) and raw feature channel.
struct AnalogGraphState {
  std::size_t n = 0;
  std::size_t feature_dim = 0;
  std::vector<double> a;  // n x n
  std::vector<double> x;  // n x F
  int t = 0;

  AnalogGraphState() = default;
  AnalogGraphState(std::size_t nodes, std::size_t features)
      : n(nodes), feature_dim(features), a(nodes * nodes, 0.0), x(nodes * features, 0.0) {}

  double& edge(std::size_t u, std::size_t v) { return a[u * n + v]; }
  double edge(std::size_t u, std::size_t v) const { return a[u * n + v]; }

  bool is_symmetric_zero_diag(double tol = 0.0) const {
    for (std::size_t u = 0; u < n; ++u) {
      if (std::abs(a[u * n + u]) > tol) return false;
      for (std::size_t v = u + 1; v < n; ++v)
        if (std::abs(a[u * n + v] - a[v * n + u]) > tol) return false;
    }
    return true;
  }
};

/// Gaussian noise for one state: the structure part is symmetrized as
/// (e + e^T)/sqrt(2) with zero diagonal, so each off-diagonal entry is still
/// standard normal.
struct StateNoise {
  std::vector<double> a;
  std::vector<double> x;

  static StateNoise zeros(std::size_t n, std::size_t f) { return {std::vector<double>(n * n, 0.0), std::vector<double>(n * f, 0.0)}; }

  static StateNoise sample(std::size_t n, std::size_t f, Rng& rng) {
    StateNoise e = zeros(n, f);
    for (std::size_t u = 0; u < n; ++u)
      for (std::size_t v = u + 1; v < n; ++v) {
        const double z1 = rng.normal(), z2 = rng.normal();
        e.a[u * n + v] = e.a[v * n + u] = (z1 + z2) / std::numbers::sqrt2;
      }
    for (auto& v : e.x) v = rng.normal();
    return e;
  }
};

/// Edges become +scale, non-edges -scale, diagonal 0; features copied.
inline AnalogGraphState encode_analog(const Graph& g, double scale = 1.0) {
  AnalogGraphState s(g.n(), g.feature_dim());
  for (std::size_t u = 0; u < g.n(); ++u)
    for (std::size_t v = 0; v < g.n(); ++v)
      if (u != v) s.a[u * g.n() + v] = g.has_edge(u, v) ? scale : -scale;
  s.x = g.features();
  return s;
}

/// Edge iff the symmetrized structure entry is strictly positive.
inline Graph decode_analog(const AnalogGraphState& s) {
  Graph g(s.n, s.feature_dim);
  for (std::size_t u = 0; u < s.n; ++u)
    for (std::size_t v = u + 1; v < s.n; ++v)
      if (0.5 * (s.a[u * s.n + v] + s.a[v * s.n + u]) > 0.0) g.add_edge(u, v);
  g.features() = s.x;
  return g;
}

namespace diffusion_detail {

inline void check_step(int t, const NoiseSchedule& s, const char* op) {
  if (t < 0 || t > s.steps)
    throw ContractViolation(std::string(op) + ": step " + std::to_string(t) + " outside [0, " +
                            std::to_string(s.steps) + "]");
}

inline void check_noise(const AnalogGraphState& s, const StateNoise& e, const char* op) {
  if (e.a.size() != s.a.size() || e.x.size() != s.x.size())
    throw ContractViolation(std::string(op) + ": noise shape does not match state");
}

inline void zero_diagonal(AnalogGraphState& s) {
  for (std::size_t u = 0; u < s.n; ++u) s.a[u * s.n + u] = 0.0;
}

}  // namespace diffusion_detail

/// Closed-form marginal: x_t = sqrt(gamma_t) x_0 + sqrt(1 - gamma_t) eps, for
/// both channels. t = 0 returns the clean state.
inline AnalogGraphState forward_corrupt(const AnalogGraphState& clean, int t, const StateNoise& noise,
                                        const NoiseSchedule& schedule) {
  diffusion_detail::check_step(t, schedule, "forward_corrupt");
  diffusion_detail::check_noise(clean, noise, "forward_corrupt");
  const double sg = std::sqrt(schedule.gamma_at(t));
  const double sn = std::sqrt(1.0 - schedule.gamma_at(t));
  AnalogGraphState out = clean;
  out.t = t;
  for (std::size_t i = 0; i < out.a.size(); ++i) out.a[i] = sg * clean.a[i] + sn * noise.a[i];
  for (std::size_t i = 0; i < out.x.size(); ++i) out.x[i] = sg * clean.x[i] + sn * noise.x[i];
  diffusion_detail::zero_diagonal(out);
  return out;
}

/// One Markov transition q(x_t | x_{t-1}) = N(sqrt(alpha_t) x_{t-1}, beta_t I).
inline AnalogGraphState forward_step(const AnalogGraphState& prev, int t, const StateNoise& noise,
                                     const NoiseSchedule& schedule) {
  if (t < 1 || t > schedule.steps)
    throw ContractViolation("forward_step: step " + std::to_string(t) + " outside [1, T]");
  diffusion_detail::check_noise(prev, noise, "forward_step");
  const double sa = std::sqrt(schedule.alpha_at(t));
  const double sb = std::sqrt(schedule.beta_at(t));
  AnalogGraphState out = prev;
  out.t = t;
  for (std::size_t i = 0; i < out.a.size(); ++i) out.a[i] = sa * prev.a[i] + sb * noise.a[i];
  for (std::size_t i = 0; i < out.x.size(); ++i) out.x[i] = sa * prev.x[i] + sb * noise.x[i];
  diffusion_detail::zero_diagonal(out);
  return out;
}

/// Coefficients of the Gaussian posterior q(x_{t-1} | x_t, x_0):
/// mean = c0 * x0 + ct * x_t, variance = var.
struct PosteriorCoefficients {
  double c0 = 0.0;
  double ct = 0.0;
  double var = 0.0;
};

inline PosteriorCoefficients posterior_coefficients(int t, const NoiseSchedule& s) {
  const double g_t = s.gamma_at(t), g_prev = s.gamma_at(t - 1);
  const double b = s.beta_at(t), a = s.alpha_at(t);
  return {std::sqrt(g_prev) * b / (1.0 - g_t), std::sqrt(a) * (1.0 - g_prev) / (1.0 - g_t),
          b * (1.0 - g_prev) / (1.0 - g_t)};
}

/// Ancestral (DDPM) reverse step from t to t-1 given a clean-state
/// prediction. At t = 1 the posterior mean is returned without noise.
inline AnalogGraphState ddpm_step(const AnalogGraphState& state, const AnalogGraphState& predicted_clean,
                                  int t, const NoiseSchedule& schedule, const StateNoise& noise) {
  if (t < 1 || t > schedule.steps)
    throw ContractViolation("ddpm_step: step " + std::to_string(t) + " outside [1, " +
                            std::to_string(schedule.steps) + "]");
  diffusion_detail::check_noise(state, noise, "ddpm_step");
  require(predicted_clean.a.size() == state.a.size() && predicted_clean.x.size() == state.x.size(),
          "ddpm_step: prediction shape does not match state");
  const auto c = posterior_coefficients(t, schedule);
  const double sd = t == 1 ? 0.0 : std::sqrt(c.var);
  AnalogGraphState out = state;
  out.t = t - 1;
  for (std::size_t i = 0; i < out.a.size(); ++i)
    out.a[i] = c.c0 * predicted_clean.a[i] + c.ct * state.a[i] + sd * noise.a[i];
  for (std::size_t i = 0; i < out.x.size(); ++i)
    out.x[i] = c.c0 * predicted_clean.x[i] + c.ct * state.x[i] + sd * noise.x[i];
  diffusion_detail::zero_diagonal(out);
  return out;
}

/// Deterministic (DDIM, eta = 0) jump from t to t_next < t:
/// x_next = sqrt(g_next) x0 + sqrt(1 - g_next) eps_hat with
/// eps_hat = (x_t - sqrt(g_t) x0) / sqrt(1 - g_t).
inline AnalogGraphState ddim_step(const AnalogGraphState& state, const AnalogGraphState& predicted_clean,
                                  int t, int t_next, const NoiseSchedule& schedule) {
  diffusion_detail::check_step(t, schedule, "ddim_step");
  if (t_next < 0 || t_next >= t)
    throw ContractViolation("ddim_step: need 0 <= t_next < t, got t=" + std::to_string(t) +
                            " t_next=" + std::to_string(t_next));
  require(predicted_clean.a.size() == state.a.size() && predicted_clean.x.size() == state.x.size(),
          "ddim_step: prediction shape does not match state");
  const double g_t = schedule.gamma_at(t), g_n = schedule.gamma_at(t_next);
  if (!(g_t < 1.0)) throw NumericFault("ddim_step: degenerate schedule, gamma(" + std::to_string(t) + ") = 1");
  const double sg_t = std::sqrt(g_t), sn_t = std::sqrt(1.0 - g_t);
  const double sg_n = std::sqrt(g_n), sn_n = std::sqrt(1.0 - g_n);
  AnalogGraphState out = state;
  out.t = t_next;
  auto update = [&](std::vector<double>& dst, const std::vector<double>& xt, const std::vector<double>& x0) {
    for (std::size_t i = 0; i < dst.size(); ++i) {
      if (t_next == 0) {
        dst[i] = x0[i];
        continue;
      }
      const double eps = (xt[i] - sg_t * x0[i]) / sn_t;
      dst[i] = sg_n * x0[i] + sn_n * eps;
    }
  };
  update(out.a, state.a, predicted_clean.a);
  update(out.x, state.x, predicted_clean.x);
  diffusion_detail::zero_diagonal(out);
  return out;
}

/// Initial sampling state: symmetric standard-normal structure, normal features.
inline AnalogGraphState gaussian_state(std::size_t n, std::size_t f, int t, Rng& rng) {
  AnalogGraphState s(n, f);
  const auto e = StateNoise::sample(n, f, rng);
  s.a = e.a;
  s.x = e.x;
  s.t = t;
  return s;
}

}  // namespace sbgd
