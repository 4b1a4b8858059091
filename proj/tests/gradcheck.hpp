#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "sbgd/tensor.hpp"

namespace sbgd::testing {

struct GradcheckResult {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
};

/// Compares analytic gradients of `loss(inputs)` against central differences
/// for every entry of every input.
inline GradcheckResult gradcheck(const std::function<Tensor(const std::vector<Tensor>&)>& loss,
                                 std::vector<Tensor> inputs, double step = 1e-5) {
  for (auto& t : inputs) {
    t.set_requires_grad(true);
    t.zero_grad();
  }
  backward(loss(inputs));
  GradcheckResult r;
  for (auto& t : inputs) {
    const auto analytic = t.grad();
    auto values = t.data_mut();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      values[i] = saved + step;
      const double up = loss(inputs).item();
      values[i] = saved - step;
      const double down = loss(inputs).item();
      values[i] = saved;
      const double numeric = (up - down) / (2.0 * step);
      const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), 1e-3});
      r.max_rel_error = std::max(r.max_rel_error, std::abs(analytic[i] - numeric) / denom);
      ++r.checked;
    }
  }
  return r;
}

}  // namespace sbgd::testing
