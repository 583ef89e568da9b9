// SPDX-License-Identifier: Apache-2.0
//
// Flow-similarity branch: parameter-free one-hop propagation over the
// symmetric-normalized physical graph and the random-walk-normalized
// similarity graph, channel split into inflow / outflow embeddings, then a
// residual ReLU transform per channel.
#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "pbgru/nn/batch.hpp"
#include "pbgru/numerics/matrix.hpp"
#include "pbgru/numerics/rng.hpp"
#include "pbgru/numerics/tensor.hpp"

namespace pbgru::nn {

enum class FsgcnGraphs { physical_and_similarity, physical, similarity };

/// Embedding width per station: t_in per graph used.
std::size_t fsgcn_width(std::size_t t_in, FsgcnGraphs graphs);

/// Left-multiplies `stacked` [n x cols] by an [n x n] operator.
Tensor propagate(const Tensor& stacked, const Matrix& op);

struct SgcResult {
  Tensor hp, hs;  // [n x windows*t_in*2]; undefined when that graph is unused
};

SgcResult sgc_propagate(const BatchInput& in, const Matrix& physical_norm, const Matrix& similarity_norm,
                        FsgcnGraphs graphs = FsgcnGraphs::physical_and_similarity);

struct ChannelEmbeddings {
  Tensor h_if, h_of;  // [R x width]: physical steps 1..t_in, then similarity steps 1..t_in
};

ChannelEmbeddings split_and_embed(const SgcResult& sgc, std::size_t windows, std::size_t n, std::size_t t_in);

/// relu(h + (h W^T + b))
Tensor residual_transform(const Tensor& h, const Tensor& w, const Tensor& b);

struct FsgcnParams {
  Tensor w_if, b_if, w_of, b_of;

  static FsgcnParams init(std::size_t width, Rng& rng);
  void append_named(std::vector<NamedTensor>& out) const;
};

struct FsgcnResult {
  Tensor o_if, o_of;
};

/// With literal_outflow_residual the outflow residual reads the inflow embedding, as the
/// outflow formula is sometimes printed: relu(H_of + W_of H_if + b_of).
FsgcnResult fsgcn_forward(const BatchInput& in, const Matrix& physical_norm, const Matrix& similarity_norm,
                          const FsgcnParams& p, FsgcnGraphs graphs, bool literal_outflow_residual = false);

}  // namespace pbgru::nn
