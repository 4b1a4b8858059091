#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "tensor.hpp"

namespace sbgd {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// First/second moment accumulators, one pair per parameter, plus the step
/// counter used for bias correction.
struct OptimizerState {
  AdamConfig config;
  std::uint64_t step = 0;
  std::vector<std::vector<double>> first_moment;
  std::vector<std::vector<double>> second_moment;

  static OptimizerState for_params(const std::vector<Tensor>& params, AdamConfig config = {}) {
    OptimizerState s;
    s.config = config;
    for (const auto& p : params) {
      s.first_moment.emplace_back(p.numel(), 0.0);
      s.second_moment.emplace_back(p.numel(), 0.0);
    }
    return s;
  }

  bool operator==(const OptimizerState& o) const {
    return step == o.step && first_moment == o.first_moment && second_moment == o.second_moment &&
           config.learning_rate == o.config.learning_rate && config.beta1 == o.config.beta1 &&
           config.beta2 == o.config.beta2 && config.epsilon == o.config.epsilon;
  }
};

/// Bias-corrected Adam update using each parameter's accumulated gradient.
/// A parameter never reached by backward is treated as having zero gradient.
inline void adam_step(std::vector<Tensor>& params, OptimizerState& state) {
  if (params.size() != state.first_moment.size()) {
    throw ContractViolation("adam_step: " + std::to_string(params.size()) +
                            " parameters but optimizer tracks " +
                            std::to_string(state.first_moment.size()));
  }
  for (std::size_t k = 0; k < params.size(); ++k) {
    if (params[k].numel() != state.first_moment[k].size()) {
      throw ContractViolation("adam_step: parameter " + std::to_string(k) + " has shape " +
                              params[k].shape().str() + " but moments hold " +
                              std::to_string(state.first_moment[k].size()) + " elements");
    }
  }
  state.step += 1;
  const auto& c = state.config;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(c.beta1, t);
  const double correction2 = 1.0 - std::pow(c.beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& p = params[k];
    if (!p.has_grad()) {
      // zero gradient: moments still decay, and the parameter moves by the
      // residual first moment
      for (auto& m : state.first_moment[k]) m *= c.beta1;
      for (auto& v : state.second_moment[k]) v *= c.beta2;
    } else {
      const auto g = p.grad_mut();
      auto& m = state.first_moment[k];
      auto& v = state.second_moment[k];
      for (std::size_t i = 0; i < g.size(); ++i) {
        m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g[i];
        v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g[i] * g[i];
      }
    }
    auto w = p.data_mut();
    const auto& m = state.first_moment[k];
    const auto& v = state.second_moment[k];
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double mhat = m[i] / correction1;
      const double vhat = v[i] / correction2;
      w[i] -= c.learning_rate * mhat / (std::sqrt(vhat) + c.epsilon);
    }
  }
}

}  // namespace sbgd
