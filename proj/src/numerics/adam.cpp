// SPDX-License-Identifier: Apache-2.0
#include "pbgru/numerics/adam.hpp"

#include <cmath>
#include <string>

#include "pbgru/numerics/errors.hpp"

namespace pbgru {

AdamState make_adam_state(std::span<const Tensor> params, double learning_rate) {
  if (!(learning_rate > 0.0)) throw NumericError("Adam learning rate must be positive");
  AdamState state;
  state.learning_rate = learning_rate;
  for (const Tensor& p : params) {
    state.first_moment.emplace_back(p.numel(), 0.0);
    state.second_moment.emplace_back(p.numel(), 0.0);
  }
  return state;
}

void adam_step(std::span<Tensor> params, AdamState& state) {
  if (params.size() != state.first_moment.size()) {
    throw ShapeError("adam_step: " + std::to_string(params.size()) + " params vs " +
                     std::to_string(state.first_moment.size()) + " moment buffers");
  }
  for (std::size_t k = 0; k < params.size(); ++k) {
    const auto g = params[k].grad();
    if (g.size() != state.first_moment[k].size()) {
      throw ShapeError("adam_step: parameter " + std::to_string(k) + " has no gradient of matching size");
    }
    for (double v : g) {
      if (!std::isfinite(v)) throw NumericError("adam_step: non-finite gradient, update refused");
    }
  }

  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(state.beta1, t);
  const double correction2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto values = params[k].mutable_values();
    const auto g = params[k].grad();
    auto& m = state.first_moment[k];
    auto& v = state.second_moment[k];
    for (std::size_t i = 0; i < values.size(); ++i) {
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
      const double m_hat = m[i] / correction1;
      const double v_hat = v[i] / correction2;
      values[i] -= state.learning_rate * m_hat / (std::sqrt(v_hat) + state.epsilon);
    }
  }
}

}  // namespace pbgru
