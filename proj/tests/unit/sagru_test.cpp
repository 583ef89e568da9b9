// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "pbgru/nn/sagru.hpp"
#include "pbgru/numerics/errors.hpp"
#include "pbgru/numerics/grad_check.hpp"
#include "pbgru/numerics/ops.hpp"
#include "test_util.hpp"

namespace pbgru::nn {
namespace {

using testing::random_tensor;

std::vector<Tensor> random_sequence(Rng& rng, std::size_t steps, std::size_t rows, std::size_t d) {
  std::vector<Tensor> xs;
  for (std::size_t t = 0; t < steps; ++t) xs.push_back(random_tensor(rng, {rows, d}, false));
  return xs;
}

void expect_same(const Tensor& a, const Tensor& b, double tol = 0.0) {
  ASSERT_EQ(a.shape(), b.shape());
  for (std::size_t i = 0; i < a.numel(); ++i) EXPECT_NEAR(a.value(i), b.value(i), tol) << "index " << i;
}

void expect_passes(const GradCheckReport& report) {
  EXPECT_TRUE(report.passed()) << "max rel err " << report.max_relative_error();
  for (const auto& e : report.entries) EXPECT_TRUE(e.passed) << e.name << " " << e.max_relative_error;
}

TEST(GruCell, ZeroParamsZeroStateGivesZero) {
  const auto p = GruCellParams::zeros(2, 3);
  Rng rng(1);
  const Tensor h = gru_cell(random_tensor(rng, {4, 2}, false), Tensor::zeros({4, 3}), p);
  for (double v : h.values()) EXPECT_EQ(v, 0.0);
}

TEST(GruCell, ZeroParamsHalvesState) {
  const auto p = GruCellParams::zeros(2, 3);
  Rng rng(2);
  const Tensor prev = random_tensor(rng, {4, 3}, false);
  const Tensor h = gru_cell(random_tensor(rng, {4, 2}, false), prev, p);
  for (std::size_t i = 0; i < h.numel(); ++i) EXPECT_DOUBLE_EQ(h.value(i), 0.5 * prev.value(i));
}

TEST(GruCell, MatchesHandComputedGates) {
  // d_in = 1, h = 1 with distinct gate weights
  const auto w_ih = Tensor::from_values({3, 1}, {0.5, -0.3, 0.8}, true);
  const auto w_hh = Tensor::from_values({3, 1}, {0.2, 0.4, -0.6}, true);
  const auto b = Tensor::from_values({3}, {0.1, -0.2, 0.05}, true);
  const GruCellParams p{w_ih, w_hh, b};
  const double x = 1.5, hp = -0.7;
  const double z = 1.0 / (1.0 + std::exp(-(0.5 * x + 0.1 + 0.2 * hp)));
  const double r = 1.0 / (1.0 + std::exp(-(-0.3 * x - 0.2 + 0.4 * hp)));
  const double c = std::tanh(0.8 * x + 0.05 + r * (-0.6 * hp));
  const Tensor h = gru_cell(Tensor::from_values({1, 1}, {x}), Tensor::from_values({1, 1}, {hp}), p);
  EXPECT_NEAR(h.item(), z * hp + (1.0 - z) * c, 1e-15);
}

TEST(GruCell, RejectsShapeMismatch) {
  const auto p = GruCellParams::zeros(2, 3);
  EXPECT_THROW(gru_cell(Tensor::zeros({4, 3}), Tensor::zeros({4, 3}), p), ShapeError);
  EXPECT_THROW(gru_cell(Tensor::zeros({4, 2}), Tensor::zeros({4, 2}), p), ShapeError);
}

TEST(GruCell, GradientOverThreeStepRollout) {
  Rng rng(3);
  auto p = GruCellParams::init(2, 4, rng);
  const auto xs = random_sequence(rng, 3, 5, 2);
  std::vector<NamedTensor> params;
  p.append_named("cell", params);
  const auto report = grad_check(
      [&] {
        const auto hs = gru_sequence(xs, p);
        return mean(tanh(hs.back()));
      },
      params);
  ASSERT_EQ(report.entries.size(), 3u);
  expect_passes(report);
}

TEST(BiGru, SingleStepIsSumOfDirections) {
  Rng rng(4);
  const auto f = GruCellParams::init(2, 3, rng);
  const auto b = GruCellParams::init(2, 3, rng);
  const auto xs = random_sequence(rng, 1, 4, 2);
  const auto out = bigru_layer(xs, f, b);
  const Tensor h0 = Tensor::zeros({4, 3});
  expect_same(out[0], add(gru_cell(xs[0], h0, f), gru_cell(xs[0], h0, b)), 1e-15);
}

TEST(BiGru, ParameterSwapAndReversalReversesOutput) {
  Rng rng(5);
  const auto f = GruCellParams::init(2, 3, rng);
  const auto b = GruCellParams::init(2, 3, rng);
  const auto xs = random_sequence(rng, 5, 3, 2);
  auto rev = xs;
  std::reverse(rev.begin(), rev.end());
  const auto out = bigru_layer(xs, f, b);
  const auto swapped = bigru_layer(rev, b, f);
  for (std::size_t t = 0; t < xs.size(); ++t) expect_same(swapped[t], out[xs.size() - 1 - t], 1e-14);
}

TEST(BiGru, ZeroInputZeroParamsGivesZero) {
  const auto p = GruCellParams::zeros(2, 3);
  std::vector<Tensor> xs(4, Tensor::zeros({2, 2}));
  for (const auto& b : bigru_layer(xs, p, p))
    for (double v : b.values()) EXPECT_EQ(v, 0.0);
}

TEST(StackedLayer, ZeroSequenceZeroParamsGivesZero) {
  const auto p = GruCellParams::zeros(3, 3);
  std::vector<Tensor> bs(4, Tensor::zeros({2, 3}));
  for (const auto& u : gru_sequence(bs, p))
    for (double v : u.values()) EXPECT_EQ(v, 0.0);
}

TEST(StackedLayer, OutputIgnoresLaterInputs) {
  Rng rng(6);
  const auto p = GruCellParams::init(3, 3, rng);
  auto bs = random_sequence(rng, 4, 2, 3);
  const auto before = gru_sequence(bs, p);
  for (std::size_t t = 1; t < bs.size(); ++t) {
    auto perturbed = bs;
    for (std::size_t s = t; s < bs.size(); ++s) perturbed[s] = random_tensor(rng, {2, 3}, false);
    const auto after = gru_sequence(perturbed, p);
    for (std::size_t s = 0; s < t; ++s) expect_same(after[s], before[s]);
  }
}

TEST(Attention, IdenticalStepsGiveUniformWeights) {
  Rng rng(7);
  const auto p = AttentionParams::init(4, rng);
  const Tensor u = random_tensor(rng, {3, 4}, false);
  const auto res = temporal_attention({u, u, u, u}, p);
  for (double a : res.weights.values()) EXPECT_NEAR(a, 0.25, 1e-15);
  expect_same(res.output, u, 1e-14);
}

TEST(Attention, SingleStepPassesThrough) {
  Rng rng(8);
  const auto p = AttentionParams::init(4, rng);
  const Tensor u = random_tensor(rng, {3, 4}, false);
  const auto res = temporal_attention({u}, p);
  for (double a : res.weights.values()) EXPECT_EQ(a, 1.0);
  expect_same(res.output, u);
}

TEST(Attention, WeightsSumToOnePerRow) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    const auto p = AttentionParams::init(5, rng);
    const auto us = random_sequence(rng, 6, 7, 5);
    const auto res = temporal_attention(us, p);
    ASSERT_EQ(res.weights.shape(), (Shape{7, 6}));
    for (std::size_t r = 0; r < 7; ++r) {
      double s = 0.0;
      for (std::size_t t = 0; t < 6; ++t) s += res.weights.value(r * 6 + t);
      EXPECT_NEAR(s, 1.0, 1e-12);
    }
  }
}

TEST(Attention, RowsAreIndependent) {
  Rng rng(9);
  const auto p = AttentionParams::init(3, rng);
  auto us = random_sequence(rng, 4, 2, 3);
  const auto full = temporal_attention(us, p);
  std::vector<Tensor> first_row;
  for (const auto& u : us) first_row.push_back(slice_last(reshape(u, {1, 6}), 0, 3));
  const auto single = temporal_attention(first_row, p);
  for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(single.output.value(j), full.output.value(j), 1e-15);
}

TEST(Sagru, ParameterNamesAndShapes) {
  Rng rng(10);
  const auto p = SagruParams::init(2, 8, 1, rng);
  std::vector<NamedTensor> named;
  p.append_named(named);
  std::vector<std::string> names;
  for (const auto& nt : named) names.push_back(nt.name);
  const std::vector<std::string> expected{"sagru.fwd.w_ih",     "sagru.fwd.w_hh",     "sagru.fwd.b",
                                          "sagru.bwd.w_ih",     "sagru.bwd.w_hh",     "sagru.bwd.b",
                                          "sagru.stack.0.w_ih", "sagru.stack.0.w_hh", "sagru.stack.0.b",
                                          "sagru.attn.w",       "sagru.attn.b",       "sagru.attn.v"};
  EXPECT_EQ(names, expected);
  EXPECT_EQ(p.stack[0].d_in(), 8u);
}

TEST(Sagru, GradientThroughFullBranch) {
  Rng rng(11);
  auto p = SagruParams::init(2, 8, 1, rng);
  const auto xs = random_sequence(rng, 4, 4, 2);
  const Tensor target = random_tensor(rng, {4, 8}, false);
  std::vector<NamedTensor> params;
  p.append_named(params);
  const auto report = grad_check([&] { return mean(abs(sub(sagru_forward(xs, p).attention.output, target))); }, params);
  expect_passes(report);
  EXPECT_LE(report.max_relative_error(), 1e-4);
}

}  // namespace
}  // namespace pbgru::nn
