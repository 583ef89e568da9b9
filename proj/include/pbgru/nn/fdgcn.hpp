// SPDX-License-Identifier: Apache-2.0
//
// Flow-direction branch. Inflow is diffused over each exact-hop OD operator
//   M_k = (A(k) .* C) D(k)^-1        (degree on the right by default)
// and the K results form a hop axis in ascending k. Gated causal convolution
// layers run along that axis; the last hop position of the final layer is the
// branch output.
#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "pbgru/graph/graph_builder.hpp"
#include "pbgru/nn/batch.hpp"
#include "pbgru/numerics/matrix.hpp"
#include "pbgru/numerics/rng.hpp"
#include "pbgru/numerics/tensor.hpp"

namespace pbgru::nn {

enum class DegreeSide { right, left };

/// M_1..M_k. Zero degrees invert to zero.
std::vector<Matrix> diffusion_operators(const graph::GraphSet& graphs, std::size_t k,
                                        DegreeSide side = DegreeSide::right);

/// K tensors [R x t_in]: hop k holds M_k applied to the inflow channel.
std::vector<Tensor> khop_diffusion(const BatchInput& in, const std::vector<Matrix>& ops);

struct CausalConvLayer {
  std::size_t kernel_width = 0, c_in = 0, c_out = 0;
  Tensor w1, w2;  // [kernel_width x c_in x c_out]
  Tensor b1, b2;  // [c_out]
  Tensor w_res;   // [c_out x c_in], only when c_in != c_out

  static CausalConvLayer init(std::size_t kernel_width, std::size_t c_in, std::size_t c_out, Rng& rng);
  static CausalConvLayer zeros(std::size_t kernel_width, std::size_t c_in, std::size_t c_out);
  void append_named(const std::string& prefix, std::vector<NamedTensor>& out) const;
};

/// Per hop position j, with taps j-kw+1..j and zeros left of the first hop:
///   P = taps * w1 + b1,  Q = taps * w2 + b2,  out_j = tanh(P + res_j) * sigmoid(Q)
/// where res_j is the layer input at j, or w_res applied to it when widths differ.
std::vector<Tensor> gated_causal_conv(const std::vector<Tensor>& hops, const CausalConvLayer& layer);

struct FdgcnParams {
  std::vector<CausalConvLayer> layers;

  static FdgcnParams init(std::size_t t_in, std::size_t channels, std::size_t layers, std::size_t kernel_width,
                          Rng& rng);
  std::size_t out_width() const { return layers.empty() ? 0 : layers.back().c_out; }
  void append_named(std::vector<NamedTensor>& out) const;
};

struct FdgcnResult {
  std::vector<Tensor> hops;     // diffusion stack
  std::vector<Tensor> outputs;  // final layer, every hop position
  Tensor o_of;                  // last hop position
};

FdgcnResult fdgcn_forward(const BatchInput& in, const std::vector<Matrix>& ops, const FdgcnParams& p);

}  // namespace pbgru::nn
