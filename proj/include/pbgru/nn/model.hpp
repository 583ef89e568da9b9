// SPDX-License-Identifier: Apache-2.0
//
// Full model: SAGRU + FSGCN + FDGCN embeddings, dropout on each embedding,
// and two per-station linear heads
//   inflow  = W_in  [O_GRU | O_FSif]          + b_in
//   outflow = W_out [O_GRU | O_FSof | O_FDof] + b_out
// Ablation variants drop embeddings from the concatenations.
#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "pbgru/graph/graph_builder.hpp"
#include "pbgru/nn/batch.hpp"
#include "pbgru/nn/fdgcn.hpp"
#include "pbgru/nn/fsgcn.hpp"
#include "pbgru/nn/sagru.hpp"

namespace pbgru::nn {

enum class Ablation { base, p_base, d_base, pd_base, full };
Ablation ablation_from_string(std::string_view tag);
const char* to_string(Ablation a);
inline constexpr Ablation kAllAblations[] = {Ablation::base, Ablation::p_base, Ablation::d_base, Ablation::pd_base,
                                             Ablation::full};

struct ModelConfig {
  std::size_t t_in = 4;
  std::size_t t_out = 4;
  std::size_t hidden = 650;
  std::size_t stack_layers = 1;
  std::size_t k_hops = 5;
  std::size_t fd_layers = 2;
  std::size_t kernel_width = 2;
  std::size_t fd_channels = 0;  // 0 means t_in
  double dropout_heavy = 0.4;   // O_GRU and O_FDof
  double dropout_light = 0.1;   // FSGCN embeddings
  Ablation ablation = Ablation::full;
  bool literal_outflow_residual = false;
  DegreeSide degree_side = DegreeSide::right;

  std::size_t fd_width() const { return fd_channels ? fd_channels : t_in; }
  bool uses_fsgcn() const { return ablation != Ablation::base; }
  bool uses_fdgcn() const { return ablation == Ablation::full; }
  FsgcnGraphs fsgcn_graphs() const;
  /// Throws ConfigError on a nonsensical combination.
  void validate() const;
};

struct HeadWidths {
  std::size_t in = 0, out = 0;
};
HeadWidths head_widths(const ModelConfig& cfg);

/// Graph operators the forward pass reads, fixed for a dataset.
struct ModelGraphs {
  std::size_t n = 0;
  Matrix physical_norm;
  Matrix similarity_norm;
  std::vector<Matrix> diffusion;  // hops 1..K

  static ModelGraphs from_graph_set(const graph::GraphSet& gs, const ModelConfig& cfg);
};

struct ModelParams {
  SagruParams sagru;
  FsgcnParams fsgcn;  // undefined tensors when unused
  FdgcnParams fdgcn;  // no layers when unused
  Tensor w_in, b_in, w_out, b_out;

  static ModelParams init(const ModelConfig& cfg, Rng& rng);
  /// Stable checkpoint order.
  std::vector<NamedTensor> named_parameters() const;
  std::vector<Tensor> tensors() const;
};

std::size_t parameter_count(const std::vector<NamedTensor>& params);

enum class Mode { train, eval };

struct ForwardResult {
  Tensor prediction;                        // [R x 2*t_out], inflow steps then outflow steps
  Tensor o_gru, o_fs_if, o_fs_of, o_fd_of;  // after dropout; undefined when unused
  Tensor attention;
};

/// Inverted dropout; identity for rate 0. The mask is a constant.
Tensor dropout(const Tensor& x, double rate, Rng& rng);

/// `rng` is only read in train mode.
ForwardResult forward(const BatchInput& in, const ModelGraphs& graphs, const ModelParams& params,
                      const ModelConfig& cfg, Mode mode, Rng* rng = nullptr);

}  // namespace pbgru::nn
