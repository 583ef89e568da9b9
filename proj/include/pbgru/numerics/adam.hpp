// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "pbgru/numerics/tensor.hpp"

namespace pbgru {

struct AdamState {
  std::uint64_t step = 0;
  std::vector<std::vector<double>> first_moment;
  std::vector<std::vector<double>> second_moment;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double learning_rate = 1e-3;
};

/// Zero moments shaped like params.
AdamState make_adam_state(std::span<const Tensor> params, double learning_rate);

/// One bias-corrected Adam update using each param's accumulated gradient.
/// A non-finite gradient anywhere refuses the whole update (NumericError),
/// leaving params and state untouched.
void adam_step(std::span<Tensor> params, AdamState& state);

}  // namespace pbgru
