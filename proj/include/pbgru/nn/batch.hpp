// SPDX-License-Identifier: Apache-2.0
//
// One mini-batch of input windows in the layouts the three branches consume.
// Rows of every per-station tensor are ordered window-major: r = b * n + i.
#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "pbgru/numerics/tensor.hpp"

namespace pbgru::nn {

struct BatchInput {
  std::size_t windows = 0, n = 0, t_in = 0;
  std::vector<Tensor> steps;  // t_in tensors [R x 2]
  Tensor stacked;             // [n x windows*t_in*2], column (b*t_in + t)*2 + c
  Tensor inflow;              // [n x windows*t_in],   column b*t_in + t

  std::size_t rows() const { return windows * n; }
};

/// x holds `windows` consecutive [t_in][n][2] blocks.
BatchInput make_batch_input(std::span<const double> x, std::size_t windows, std::size_t n, std::size_t t_in);

/// y holds `windows` consecutive [t_out][n][2] blocks; result is [R x 2*t_out]
/// with columns (inflow step 1..t_out, outflow step 1..t_out).
Tensor make_target(std::span<const double> y, std::size_t windows, std::size_t n, std::size_t t_out);
/// Inverse of make_target's layout: [R x 2*t_out] back to [t_out][n][2] blocks.
std::vector<double> unpack_prediction(const Tensor& pred, std::size_t windows, std::size_t n, std::size_t t_out);

}  // namespace pbgru::nn
