// SPDX-License-Identifier: Apache-2.0
#include "pbgru/nn/model.hpp"

#include <cmath>

#include "pbgru/numerics/errors.hpp"
#include "pbgru/numerics/ops.hpp"

namespace pbgru::nn {

Ablation ablation_from_string(std::string_view tag) {
  for (Ablation a : kAllAblations)
    if (tag == to_string(a)) return a;
  throw ConfigError("unknown ablation tag '" + std::string(tag) + "' (base|p-base|d-base|pd-base|full)");
}

const char* to_string(Ablation a) {
  switch (a) {
    case Ablation::base:
      return "base";
    case Ablation::p_base:
      return "p-base";
    case Ablation::d_base:
      return "d-base";
    case Ablation::pd_base:
      return "pd-base";
    case Ablation::full:
      return "full";
  }
  return "full";
}

FsgcnGraphs ModelConfig::fsgcn_graphs() const {
  switch (ablation) {
    case Ablation::p_base:
      return FsgcnGraphs::physical;
    case Ablation::d_base:
      return FsgcnGraphs::similarity;
    default:
      return FsgcnGraphs::physical_and_similarity;
  }
}

void ModelConfig::validate() const {
  auto positive = [](std::size_t v, const char* name) {
    if (v == 0) throw ConfigError(std::string(name) + " must be positive");
  };
  positive(t_in, "t_in");
  positive(t_out, "t_out");
  positive(hidden, "hidden");
  positive(k_hops, "k_hops");
  positive(fd_layers, "fdgcn.layers");
  positive(kernel_width, "fdgcn.kernel_width");
  for (double r : {dropout_heavy, dropout_light})
    if (!(r >= 0.0 && r < 1.0)) throw ConfigError("dropout rates must lie in [0, 1)");
}

HeadWidths head_widths(const ModelConfig& cfg) {
  HeadWidths w{cfg.hidden, cfg.hidden};
  if (cfg.uses_fsgcn()) {
    const std::size_t fs = fsgcn_width(cfg.t_in, cfg.fsgcn_graphs());
    w.in += fs;
    w.out += fs;
  }
  if (cfg.uses_fdgcn()) w.out += cfg.fd_width();
  return w;
}

ModelGraphs ModelGraphs::from_graph_set(const graph::GraphSet& gs, const ModelConfig& cfg) {
  ModelGraphs g;
  g.n = gs.n;
  g.physical_norm = gs.physical_norm;
  g.similarity_norm = gs.similarity_norm;
  if (cfg.uses_fdgcn()) g.diffusion = diffusion_operators(gs, cfg.k_hops, cfg.degree_side);
  return g;
}

ModelParams ModelParams::init(const ModelConfig& cfg, Rng& rng) {
  cfg.validate();
  ModelParams p;
  p.sagru = SagruParams::init(2, cfg.hidden, cfg.stack_layers, rng);
  if (cfg.uses_fsgcn()) p.fsgcn = FsgcnParams::init(fsgcn_width(cfg.t_in, cfg.fsgcn_graphs()), rng);
  if (cfg.uses_fdgcn()) p.fdgcn = FdgcnParams::init(cfg.t_in, cfg.fd_width(), cfg.fd_layers, cfg.kernel_width, rng);
  const HeadWidths w = head_widths(cfg);
  p.w_in = uniform_param({cfg.t_out, w.in}, 1.0 / std::sqrt(static_cast<double>(w.in)), rng);
  p.b_in = uniform_param({cfg.t_out}, 1.0 / std::sqrt(static_cast<double>(w.in)), rng);
  p.w_out = uniform_param({cfg.t_out, w.out}, 1.0 / std::sqrt(static_cast<double>(w.out)), rng);
  p.b_out = uniform_param({cfg.t_out}, 1.0 / std::sqrt(static_cast<double>(w.out)), rng);
  return p;
}

std::vector<NamedTensor> ModelParams::named_parameters() const {
  std::vector<NamedTensor> out;
  sagru.append_named(out);
  if (fsgcn.w_if.defined()) fsgcn.append_named(out);
  fdgcn.append_named(out);
  out.push_back({"head.w_in", w_in});
  out.push_back({"head.b_in", b_in});
  out.push_back({"head.w_out", w_out});
  out.push_back({"head.b_out", b_out});
  return out;
}

std::vector<Tensor> ModelParams::tensors() const {
  std::vector<Tensor> out;
  for (auto& nt : named_parameters()) out.push_back(nt.tensor);
  return out;
}

std::size_t parameter_count(const std::vector<NamedTensor>& params) {
  std::size_t n = 0;
  for (const auto& p : params) n += p.tensor.numel();
  return n;
}

Tensor dropout(const Tensor& x, double rate, Rng& rng) {
  if (rate <= 0.0) return x;
  const double keep = 1.0 - rate;
  std::vector<double> mask(x.numel());
  for (double& m : mask) m = rng.uniform() < keep ? 1.0 / keep : 0.0;
  return mul(x, Tensor::from_values(x.shape(), std::move(mask)));
}

ForwardResult forward(const BatchInput& in, const ModelGraphs& graphs, const ModelParams& params,
                      const ModelConfig& cfg, Mode mode, Rng* rng) {
  if (graphs.n != in.n) {
    throw DataError("graphs cover " + std::to_string(graphs.n) + " stations but the input has " + std::to_string(in.n));
  }
  if (in.t_in != cfg.t_in) throw ShapeError("input window length differs from the configured t_in");
  if (mode == Mode::train && !rng) throw ShapeError("train-mode forward needs an RNG for dropout");
  auto drop = [&](const Tensor& t, double rate) { return mode == Mode::train ? dropout(t, rate, *rng) : t; };

  ForwardResult r;
  const SagruResult sg = sagru_forward(in.steps, params.sagru);
  r.attention = sg.attention.weights;
  r.o_gru = drop(sg.attention.output, cfg.dropout_heavy);

  std::vector<Tensor> in_parts{r.o_gru}, out_parts{r.o_gru};
  if (cfg.uses_fsgcn()) {
    const FsgcnResult fs = fsgcn_forward(in, graphs.physical_norm, graphs.similarity_norm, params.fsgcn,
                                         cfg.fsgcn_graphs(), cfg.literal_outflow_residual);
    r.o_fs_if = drop(fs.o_if, cfg.dropout_light);
    r.o_fs_of = drop(fs.o_of, cfg.dropout_light);
    in_parts.push_back(r.o_fs_if);
    out_parts.push_back(r.o_fs_of);
  }
  if (cfg.uses_fdgcn()) {
    r.o_fd_of = drop(fdgcn_forward(in, graphs.diffusion, params.fdgcn).o_of, cfg.dropout_heavy);
    out_parts.push_back(r.o_fd_of);
  }
  const Tensor y_in = linear(in_parts.size() == 1 ? in_parts[0] : concat_last(in_parts), params.w_in, params.b_in);
  const Tensor y_out =
      linear(out_parts.size() == 1 ? out_parts[0] : concat_last(out_parts), params.w_out, params.b_out);
  r.prediction = concat_last({y_in, y_out});
  return r;
}

}  // namespace pbgru::nn
