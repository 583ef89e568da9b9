// SPDX-License-Identifier: Apache-2.0
//
// Differentiable tensor operations. Binary ops require equal shapes; the only
// broadcast is add_bias along the last axis. Every result is checked for
// finiteness and a NumericError names the op that produced a NaN or Inf.
#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "pbgru/numerics/tensor.hpp"

namespace pbgru {

// Linear algebra on rank-2 tensors.
Tensor matmul(const Tensor& a, const Tensor& b);
/// x [r x in], weight [out x in], optional bias [out]  ->  x * weight^T + bias.
Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias = {});
Tensor transpose(const Tensor& a);

// Elementwise.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
/// scale * x + shift
Tensor affine(const Tensor& x, double scale, double shift);
Tensor tanh(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor relu(const Tensor& x);
Tensor exp(const Tensor& x);
/// |x| with subgradient 0 at x == 0.
Tensor abs(const Tensor& x);
/// Generic elementwise map with caller-supplied derivative.
Tensor map_unary(const Tensor& x, const std::function<double(double)>& f, const std::function<double(double)>& df,
                 const char* name = "map");

/// x [... x c] + bias [c]
Tensor add_bias(const Tensor& x, const Tensor& bias);
/// x [r x c] scaled row-wise by s [r x 1].
Tensor scale_rows(const Tensor& x, const Tensor& s);

// Structural.
Tensor concat_last(std::span<const Tensor> parts);
Tensor concat_last(std::initializer_list<Tensor> parts);
Tensor slice_last(const Tensor& x, std::size_t begin, std::size_t end);
Tensor reshape(const Tensor& x, Shape shape);
/// out[i] = x.flat[indices[i]]; gradient scatters back. Covers permutes,
/// selections and repeats.
Tensor gather(const Tensor& x, std::vector<std::size_t> indices, Shape shape);

// Reductions.
Tensor softmax(const Tensor& x, std::size_t axis);
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

namespace fault {
/// Test hook: flips the sign of tanh's backward rule so gradient checks can
/// demonstrate they catch a wrong derivative.
void set_tanh_grad_sign_flip(bool enabled);
bool tanh_grad_sign_flipped();
}  // namespace fault

}  // namespace pbgru
