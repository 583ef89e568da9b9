// SPDX-License-Identifier: Apache-2.0
#include "pbgru/nn/fsgcn.hpp"

#include <cmath>

#include "pbgru/nn/sagru.hpp"
#include "pbgru/numerics/errors.hpp"
#include "pbgru/numerics/ops.hpp"

namespace pbgru::nn {

std::size_t fsgcn_width(std::size_t t_in, FsgcnGraphs graphs) {
  return graphs == FsgcnGraphs::physical_and_similarity ? 2 * t_in : t_in;
}

Tensor propagate(const Tensor& stacked, const Matrix& op) {
  if (!op.square() || op.rows != stacked.dim(0)) {
    throw ShapeError("graph operator is " + std::to_string(op.rows) + "x" + std::to_string(op.cols) +
                     " but the input has " + std::to_string(stacked.dim(0)) + " stations");
  }
  return matmul(Tensor::from_matrix(op), stacked);
}

SgcResult sgc_propagate(const BatchInput& in, const Matrix& physical_norm, const Matrix& similarity_norm,
                        FsgcnGraphs graphs) {
  SgcResult r;
  if (graphs != FsgcnGraphs::similarity) r.hp = propagate(in.stacked, physical_norm);
  if (graphs != FsgcnGraphs::physical) r.hs = propagate(in.stacked, similarity_norm);
  return r;
}

namespace {
// Picks channel c of every step for row (b, i): out[r][t] = h[i][(b*t_in + t)*2 + c].
Tensor channel_rows(const Tensor& h, std::size_t windows, std::size_t n, std::size_t t_in, std::size_t c) {
  const std::size_t cols = windows * t_in * 2;
  std::vector<std::size_t> idx;
  idx.reserve(windows * n * t_in);
  for (std::size_t b = 0; b < windows; ++b)
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t t = 0; t < t_in; ++t) idx.push_back(i * cols + (b * t_in + t) * 2 + c);
  return gather(h, std::move(idx), {windows * n, t_in});
}
}  // namespace

ChannelEmbeddings split_and_embed(const SgcResult& sgc, std::size_t windows, std::size_t n, std::size_t t_in) {
  ChannelEmbeddings e;
  for (std::size_t c = 0; c < 2; ++c) {
    std::vector<Tensor> parts;
    if (sgc.hp.defined()) parts.push_back(channel_rows(sgc.hp, windows, n, t_in, c));
    if (sgc.hs.defined()) parts.push_back(channel_rows(sgc.hs, windows, n, t_in, c));
    if (parts.empty()) throw ShapeError("split_and_embed: no propagated graph");
    (c == 0 ? e.h_if : e.h_of) = parts.size() == 1 ? parts[0] : concat_last(parts);
  }
  return e;
}

Tensor residual_transform(const Tensor& h, const Tensor& w, const Tensor& b) {
  if (w.rank() != 2 || w.dim(0) != w.dim(1))
    throw ShapeError("residual weight must be square, got " + shape_str(w.shape()));
  return relu(add(h, linear(h, w, b)));
}

FsgcnParams FsgcnParams::init(std::size_t width, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(width));
  return {uniform_param({width, width}, bound, rng), uniform_param({width}, bound, rng),
          uniform_param({width, width}, bound, rng), uniform_param({width}, bound, rng)};
}

void FsgcnParams::append_named(std::vector<NamedTensor>& out) const {
  out.push_back({"fsgcn.w_if", w_if});
  out.push_back({"fsgcn.b_if", b_if});
  out.push_back({"fsgcn.w_of", w_of});
  out.push_back({"fsgcn.b_of", b_of});
}

FsgcnResult fsgcn_forward(const BatchInput& in, const Matrix& physical_norm, const Matrix& similarity_norm,
                          const FsgcnParams& p, FsgcnGraphs graphs, bool literal_outflow_residual) {
  const auto e = split_and_embed(sgc_propagate(in, physical_norm, similarity_norm, graphs), in.windows, in.n, in.t_in);
  FsgcnResult r;
  r.o_if = residual_transform(e.h_if, p.w_if, p.b_if);
  r.o_of = literal_outflow_residual ? relu(add(e.h_of, linear(e.h_if, p.w_of, p.b_of)))
                                    : residual_transform(e.h_of, p.w_of, p.b_of);
  return r;
}

}  // namespace pbgru::nn
