// SPDX-License-Identifier: Apache-2.0
//
// Temporal branch. Every station's series runs through the same weights; a
// batch of R = windows x stations rows is processed at once, one [R x d]
// tensor per time step.
//
// GRU cell convention, with gates ordered (update z, reset r, candidate c):
//   z = sigmoid(W_z x + b_z + U_z h_prev)
//   r = sigmoid(W_r x + b_r + U_r h_prev)
//   c = tanh(W_c x + b_c + r * (U_c h_prev))
//   h = z * h_prev + (1 - z) * c
#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "pbgru/numerics/rng.hpp"
#include "pbgru/numerics/tensor.hpp"

namespace pbgru::nn {

/// Uniform(-bound, bound) tracked leaf.
Tensor uniform_param(Shape shape, double bound, Rng& rng);

struct GruCellParams {
  Tensor w_ih;  // [3h x d_in]
  Tensor w_hh;  // [3h x h]
  Tensor b;     // [3h]

  static GruCellParams init(std::size_t d_in, std::size_t hidden, Rng& rng);
  static GruCellParams zeros(std::size_t d_in, std::size_t hidden);
  std::size_t d_in() const { return w_ih.dim(1); }
  std::size_t hidden() const { return w_hh.dim(1); }
  void append_named(const std::string& prefix, std::vector<NamedTensor>& out) const;
};

Tensor gru_cell(const Tensor& x, const Tensor& h_prev, const GruCellParams& p);
/// Runs from a zero state; with `reverse` the sequence is consumed right to
/// left but outputs stay indexed by time step.
std::vector<Tensor> gru_sequence(const std::vector<Tensor>& xs, const GruCellParams& p, bool reverse = false);
/// b_t = forward_t + backward_t
std::vector<Tensor> bigru_layer(const std::vector<Tensor>& xs, const GruCellParams& fwd, const GruCellParams& bwd);

struct AttentionParams {
  Tensor w_u;  // [h x h]
  Tensor b_u;  // [h]
  Tensor v;    // [1 x h] scorer

  static AttentionParams init(std::size_t hidden, Rng& rng);
  void append_named(const std::string& prefix, std::vector<NamedTensor>& out) const;
};

struct AttentionResult {
  Tensor output;   // [R x h]
  Tensor weights;  // [R x T], rows sum to 1
};

AttentionResult temporal_attention(const std::vector<Tensor>& us, const AttentionParams& p);

struct SagruParams {
  GruCellParams fwd, bwd;
  std::vector<GruCellParams> stack;
  AttentionParams attn;

  static SagruParams init(std::size_t d_in, std::size_t hidden, std::size_t stack_layers, Rng& rng);
  std::size_t hidden() const { return fwd.hidden(); }
  void append_named(std::vector<NamedTensor>& out) const;
};

struct SagruResult {
  std::vector<Tensor> fused;    // b_t
  std::vector<Tensor> stacked;  // u_t from the top stacked layer
  AttentionResult attention;
};

SagruResult sagru_forward(const std::vector<Tensor>& xs, const SagruParams& p);

}  // namespace pbgru::nn
