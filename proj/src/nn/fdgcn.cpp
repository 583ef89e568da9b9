// SPDX-License-Identifier: Apache-2.0
#include "pbgru/nn/fdgcn.hpp"

#include <cmath>

#include "pbgru/nn/fsgcn.hpp"
#include "pbgru/nn/sagru.hpp"
#include "pbgru/numerics/errors.hpp"
#include "pbgru/numerics/ops.hpp"

namespace pbgru::nn {

std::vector<Matrix> diffusion_operators(const graph::GraphSet& graphs, std::size_t k, DegreeSide side) {
  if (k < 1) throw DataError("hop limit K must be >= 1");
  if (k > graphs.k_max()) {
    throw DataError("missing hop matrix: K=" + std::to_string(k) +
                    " but graphs were built to K=" + std::to_string(graphs.k_max()));
  }
  const std::size_t n = graphs.n;
  if (graphs.od.flow.rows != n) throw DataError("OD matrix does not match the station count");
  std::vector<Matrix> ops;
  for (std::size_t h = 0; h < k; ++h) {
    Matrix m = hadamard(graphs.hops[h].matrix, graphs.od.flow);
    const Matrix& d = graphs.degrees[h].matrix;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        const double deg = side == DegreeSide::right ? d(j, j) : d(i, i);
        m(i, j) = deg > 0.0 ? m(i, j) / deg : 0.0;
      }
    ops.push_back(std::move(m));
  }
  return ops;
}

std::vector<Tensor> khop_diffusion(const BatchInput& in, const std::vector<Matrix>& ops) {
  if (ops.empty()) throw DataError("missing hop matrix: no diffusion operators");
  const std::size_t cols = in.windows * in.t_in;
  std::vector<std::size_t> idx;
  idx.reserve(in.rows() * in.t_in);
  for (std::size_t b = 0; b < in.windows; ++b)
    for (std::size_t i = 0; i < in.n; ++i)
      for (std::size_t t = 0; t < in.t_in; ++t) idx.push_back(i * cols + b * in.t_in + t);
  std::vector<Tensor> hops;
  for (const Matrix& m : ops) hops.push_back(gather(propagate(in.inflow, m), idx, {in.rows(), in.t_in}));
  return hops;
}

CausalConvLayer CausalConvLayer::init(std::size_t kernel_width, std::size_t c_in, std::size_t c_out, Rng& rng) {
  if (kernel_width < 1) throw ConfigError("kernel width must be >= 1");
  const double bound = 1.0 / std::sqrt(static_cast<double>(kernel_width * c_in));
  CausalConvLayer l{kernel_width, c_in, c_out, {}, {}, {}, {}, {}};
  l.w1 = uniform_param({kernel_width, c_in, c_out}, bound, rng);
  l.w2 = uniform_param({kernel_width, c_in, c_out}, bound, rng);
  l.b1 = uniform_param({c_out}, bound, rng);
  l.b2 = uniform_param({c_out}, bound, rng);
  if (c_in != c_out) l.w_res = uniform_param({c_out, c_in}, 1.0 / std::sqrt(static_cast<double>(c_in)), rng);
  return l;
}

CausalConvLayer CausalConvLayer::zeros(std::size_t kernel_width, std::size_t c_in, std::size_t c_out) {
  CausalConvLayer l{kernel_width, c_in, c_out, {}, {}, {}, {}, {}};
  l.w1 = Tensor::zeros({kernel_width, c_in, c_out}, true);
  l.w2 = Tensor::zeros({kernel_width, c_in, c_out}, true);
  l.b1 = Tensor::zeros({c_out}, true);
  l.b2 = Tensor::zeros({c_out}, true);
  if (c_in != c_out) l.w_res = Tensor::zeros({c_out, c_in}, true);
  return l;
}

void CausalConvLayer::append_named(const std::string& prefix, std::vector<NamedTensor>& out) const {
  out.push_back({prefix + ".w1", w1});
  out.push_back({prefix + ".w2", w2});
  out.push_back({prefix + ".b1", b1});
  out.push_back({prefix + ".b2", b2});
  if (w_res.defined()) out.push_back({prefix + ".w_res", w_res});
}

std::vector<Tensor> gated_causal_conv(const std::vector<Tensor>& hops, const CausalConvLayer& layer) {
  if (hops.empty()) throw ShapeError("gated_causal_conv: empty hop stack");
  const std::size_t rows = hops[0].dim(0);
  for (const Tensor& h : hops) {
    if (h.shape() != Shape{rows, layer.c_in}) {
      throw ShapeError("gated_causal_conv: hop input " + shape_str(h.shape()) + " does not match " +
                       std::to_string(layer.c_in) + " input channels");
    }
  }
  const Tensor k1 = reshape(layer.w1, {layer.kernel_width * layer.c_in, layer.c_out});
  const Tensor k2 = reshape(layer.w2, {layer.kernel_width * layer.c_in, layer.c_out});
  const Tensor pad = Tensor::zeros({rows, layer.c_in});
  std::vector<Tensor> out;
  out.reserve(hops.size());
  for (std::size_t j = 0; j < hops.size(); ++j) {
    std::vector<Tensor> taps;
    for (std::size_t tap = 0; tap < layer.kernel_width; ++tap) {
      const std::ptrdiff_t pos =
          static_cast<std::ptrdiff_t>(j + tap) - static_cast<std::ptrdiff_t>(layer.kernel_width - 1);
      taps.push_back(pos < 0 ? pad : hops[static_cast<std::size_t>(pos)]);
    }
    const Tensor z = taps.size() == 1 ? taps[0] : concat_last(taps);
    const Tensor p = add_bias(matmul(z, k1), layer.b1);
    const Tensor q = add_bias(matmul(z, k2), layer.b2);
    const Tensor res = layer.w_res.defined() ? linear(hops[j], layer.w_res) : hops[j];
    out.push_back(mul(tanh(add(p, res)), sigmoid(q)));
  }
  return out;
}

FdgcnParams FdgcnParams::init(std::size_t t_in, std::size_t channels, std::size_t layers, std::size_t kernel_width,
                              Rng& rng) {
  if (layers < 1) throw ConfigError("FDGCN needs at least one layer");
  FdgcnParams p;
  std::size_t c_in = t_in;
  for (std::size_t l = 0; l < layers; ++l) {
    p.layers.push_back(CausalConvLayer::init(kernel_width, c_in, channels, rng));
    c_in = channels;
  }
  return p;
}

void FdgcnParams::append_named(std::vector<NamedTensor>& out) const {
  for (std::size_t l = 0; l < layers.size(); ++l) layers[l].append_named("fdgcn.layer" + std::to_string(l), out);
}

FdgcnResult fdgcn_forward(const BatchInput& in, const std::vector<Matrix>& ops, const FdgcnParams& p) {
  if (p.layers.empty()) throw ShapeError("fdgcn_forward: no layers");
  FdgcnResult r;
  r.hops = khop_diffusion(in, ops);
  r.outputs = r.hops;
  for (const auto& layer : p.layers) r.outputs = gated_causal_conv(r.outputs, layer);
  r.o_of = r.outputs.back();
  return r;
}

}  // namespace pbgru::nn
