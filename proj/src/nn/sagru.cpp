// SPDX-License-Identifier: Apache-2.0
#include "pbgru/nn/sagru.hpp"

#include <cmath>

#include "pbgru/numerics/errors.hpp"
#include "pbgru/numerics/ops.hpp"

namespace pbgru::nn {

Tensor uniform_param(Shape shape, double bound, Rng& rng) {
  std::vector<double> v(shape_numel(shape));
  for (double& x : v) x = rng.uniform(-bound, bound);
  return Tensor::from_values(std::move(shape), std::move(v), true);
}

GruCellParams GruCellParams::init(std::size_t d_in, std::size_t hidden, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(hidden));
  return {uniform_param({3 * hidden, d_in}, bound, rng), uniform_param({3 * hidden, hidden}, bound, rng),
          uniform_param({3 * hidden}, bound, rng)};
}

GruCellParams GruCellParams::zeros(std::size_t d_in, std::size_t hidden) {
  return {Tensor::zeros({3 * hidden, d_in}, true), Tensor::zeros({3 * hidden, hidden}, true),
          Tensor::zeros({3 * hidden}, true)};
}

void GruCellParams::append_named(const std::string& prefix, std::vector<NamedTensor>& out) const {
  out.push_back({prefix + ".w_ih", w_ih});
  out.push_back({prefix + ".w_hh", w_hh});
  out.push_back({prefix + ".b", b});
}

Tensor gru_cell(const Tensor& x, const Tensor& h_prev, const GruCellParams& p) {
  const std::size_t h = p.hidden();
  if (x.rank() != 2 || x.dim(1) != p.d_in()) {
    throw ShapeError("gru_cell: input " + shape_str(x.shape()) + " does not match d_in " + std::to_string(p.d_in()));
  }
  if (h_prev.shape() != Shape{x.dim(0), h}) {
    throw ShapeError("gru_cell: state " + shape_str(h_prev.shape()) + " does not match hidden size " +
                     std::to_string(h));
  }
  const Tensor gx = linear(x, p.w_ih, p.b);
  const Tensor gh = linear(h_prev, p.w_hh);
  const Tensor z = sigmoid(add(slice_last(gx, 0, h), slice_last(gh, 0, h)));
  const Tensor r = sigmoid(add(slice_last(gx, h, 2 * h), slice_last(gh, h, 2 * h)));
  const Tensor c = tanh(add(slice_last(gx, 2 * h, 3 * h), mul(r, slice_last(gh, 2 * h, 3 * h))));
  // z*h_prev + (1-z)*c written as c + z*(h_prev - c)
  return add(c, mul(z, sub(h_prev, c)));
}

std::vector<Tensor> gru_sequence(const std::vector<Tensor>& xs, const GruCellParams& p, bool reverse) {
  if (xs.empty()) throw ShapeError("gru_sequence: empty sequence");
  const std::size_t steps = xs.size();
  std::vector<Tensor> out(steps);
  Tensor h = Tensor::zeros({xs[0].dim(0), p.hidden()});
  for (std::size_t k = 0; k < steps; ++k) {
    const std::size_t t = reverse ? steps - 1 - k : k;
    h = gru_cell(xs[t], h, p);
    out[t] = h;
  }
  return out;
}

std::vector<Tensor> bigru_layer(const std::vector<Tensor>& xs, const GruCellParams& fwd, const GruCellParams& bwd) {
  if (fwd.d_in() != bwd.d_in() || fwd.hidden() != bwd.hidden()) {
    throw ShapeError("bigru_layer: forward and backward cells differ in shape");
  }
  const auto f = gru_sequence(xs, fwd, false);
  const auto b = gru_sequence(xs, bwd, true);
  std::vector<Tensor> out(xs.size());
  for (std::size_t t = 0; t < xs.size(); ++t) out[t] = add(f[t], b[t]);
  return out;
}

AttentionParams AttentionParams::init(std::size_t hidden, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(hidden));
  return {uniform_param({hidden, hidden}, bound, rng), uniform_param({hidden}, bound, rng),
          uniform_param({1, hidden}, bound, rng)};
}

void AttentionParams::append_named(const std::string& prefix, std::vector<NamedTensor>& out) const {
  out.push_back({prefix + ".w", w_u});
  out.push_back({prefix + ".b", b_u});
  out.push_back({prefix + ".v", v});
}

AttentionResult temporal_attention(const std::vector<Tensor>& us, const AttentionParams& p) {
  if (us.empty()) throw ShapeError("temporal_attention: empty sequence");
  std::vector<Tensor> scores;
  scores.reserve(us.size());
  for (const Tensor& u : us) scores.push_back(linear(tanh(linear(u, p.w_u, p.b_u)), p.v));
  AttentionResult res;
  res.weights = softmax(concat_last(scores), 1);
  for (std::size_t t = 0; t < us.size(); ++t) {
    const Tensor term = scale_rows(us[t], slice_last(res.weights, t, t + 1));
    res.output = t == 0 ? term : add(res.output, term);
  }
  return res;
}

SagruParams SagruParams::init(std::size_t d_in, std::size_t hidden, std::size_t stack_layers, Rng& rng) {
  SagruParams p;
  p.fwd = GruCellParams::init(d_in, hidden, rng);
  p.bwd = GruCellParams::init(d_in, hidden, rng);
  for (std::size_t i = 0; i < stack_layers; ++i) p.stack.push_back(GruCellParams::init(hidden, hidden, rng));
  p.attn = AttentionParams::init(hidden, rng);
  return p;
}

void SagruParams::append_named(std::vector<NamedTensor>& out) const {
  fwd.append_named("sagru.fwd", out);
  bwd.append_named("sagru.bwd", out);
  for (std::size_t i = 0; i < stack.size(); ++i) stack[i].append_named("sagru.stack." + std::to_string(i), out);
  attn.append_named("sagru.attn", out);
}

SagruResult sagru_forward(const std::vector<Tensor>& xs, const SagruParams& p) {
  SagruResult res;
  res.fused = bigru_layer(xs, p.fwd, p.bwd);
  res.stacked = res.fused;
  for (const auto& cell : p.stack) res.stacked = gru_sequence(res.stacked, cell, false);
  res.attention = temporal_attention(res.stacked, p.attn);
  return res;
}

}  // namespace pbgru::nn
