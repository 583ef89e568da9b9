// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>

#include "pbgru/numerics/errors.hpp"
#include "pbgru/numerics/grad_check.hpp"
#include "pbgru/numerics/ops.hpp"
#include "test_util.hpp"

namespace pbgru {
namespace {

using testing::random_away_from_zero;
using testing::random_tensor;

constexpr double kPrimitiveTol = 1e-6;
constexpr int kSeeds = 20;

GradCheckOptions primitive_options() {
  GradCheckOptions o;
  o.tolerance = kPrimitiveTol;
  return o;
}

void expect_passes(const GradCheckReport& report) {
  for (const auto& e : report.entries) {
    EXPECT_TRUE(e.passed) << e.name << " max rel err " << e.max_relative_error << " at " << e.worst_index
                          << " analytic " << e.analytic << " numeric " << e.numeric;
  }
}

TEST(Backward, SumGivesAllOnes) {
  auto x = Tensor::zeros({2, 3}, true);
  sum(x).backward();
  for (double g : x.grad()) EXPECT_EQ(g, 1.0);
}

TEST(Backward, HalfSquaredNormGivesInput) {
  Rng rng(1);
  auto x = random_tensor(rng, {4, 2});
  affine(sum(mul(x, x)), 0.5, 0.0).backward();
  for (std::size_t i = 0; i < x.numel(); ++i) EXPECT_NEAR(x.grad()[i], x.value(i), 1e-15);
}

TEST(Backward, RepeatedCallsAccumulateUntilReset) {
  auto x = Tensor::from_values({2}, {1.0, -2.0}, true);
  auto loss = sum(mul(x, x));
  loss.backward();
  loss.backward();
  EXPECT_EQ(x.grad()[0], 4.0);
  EXPECT_EQ(x.grad()[1], -8.0);
  x.zero_grad();
  loss.backward();
  EXPECT_EQ(x.grad()[0], 2.0);
}

TEST(Backward, NonScalarLossRejected) {
  auto x = Tensor::zeros({2}, true);
  EXPECT_THROW(tanh(x).backward(), ShapeError);
}

TEST(Backward, SharedSubexpressionCountedOnce) {
  auto x = Tensor::from_values({1}, {3.0}, true);
  auto y = mul(x, x);
  sum(add(y, y)).backward();  // d/dx 2x^2 = 4x
  EXPECT_EQ(x.grad()[0], 12.0);
}

TEST(GradCheck, MatmulAcrossSeeds) {
  for (int seed = 0; seed < kSeeds; ++seed) {
    Rng rng(seed);
    std::vector<NamedTensor> in{{"a", random_tensor(rng, {3, 3})}, {"b", random_tensor(rng, {3, 3})}};
    auto f = [&] { return sum(matmul(in[0].tensor, in[1].tensor)); };
    expect_passes(grad_check(f, in, primitive_options()));
  }
}

TEST(GradCheck, GatedProductAcrossSeeds) {
  for (int seed = 0; seed < kSeeds; ++seed) {
    Rng rng(100 + seed);
    std::vector<NamedTensor> in{{"x", random_tensor(rng, {2, 3})}, {"y", random_tensor(rng, {2, 3})}};
    auto f = [&] { return sum(mul(tanh(in[0].tensor), sigmoid(in[1].tensor))); };
    expect_passes(grad_check(f, in, primitive_options()));
  }
}

TEST(GradCheck, SoftmaxAcrossSeedsAndAxes) {
  for (int seed = 0; seed < kSeeds; ++seed) {
    Rng rng(200 + seed);
    std::vector<NamedTensor> in{{"x", random_tensor(rng, {3, 4})}};
    auto w = random_tensor(rng, {3, 4}, false);
    for (std::size_t axis = 0; axis < 2; ++axis) {
      auto f = [&] { return sum(mul(softmax(in[0].tensor, axis), w)); };
      expect_passes(grad_check(f, in, primitive_options()));
    }
  }
}

TEST(GradCheck, RemainingPrimitivesAcrossSeeds) {
  for (int seed = 0; seed < kSeeds; ++seed) {
    Rng rng(300 + seed);
    std::vector<NamedTensor> in{
        {"x", random_away_from_zero(rng, {4, 3})},
        {"w", random_tensor(rng, {2, 3})},
        {"b", random_tensor(rng, {2})},
        {"s", random_tensor(rng, {4, 1})},
    };
    auto probe = random_tensor(rng, {4, 7}, false);
    auto f = [&] {
      const Tensor& x = in[0].tensor;
      auto lin = linear(x, in[1].tensor, in[2].tensor);                                               // [4x2]
      auto cat = concat_last({relu(x), abs(x), scale_rows(exp(slice_last(x, 0, 1)), in[3].tensor)});  // [4x7]
      std::vector<std::size_t> reversed(28);
      for (std::size_t i = 0; i < 28; ++i) reversed[i] = 27 - i;
      auto flipped = reshape(gather(reshape(cat, {28}), reversed, {28}), {4, 7});
      auto mixed = add(cat, mul(flipped, cat));
      auto biased = add_bias(sub(mixed, affine(cat, 0.3, 1.0)), Tensor::from_values({7}, {1, 2, 3, 4, 5, 6, 7}));
      return add(mean(mul(biased, probe)), sum(mul(lin, lin)));
    };
    expect_passes(grad_check(f, in, primitive_options()));
  }
}

TEST(GradCheck, GatherAndTransposeRoutesGradient) {
  for (int seed = 0; seed < kSeeds; ++seed) {
    Rng rng(400 + seed);
    std::vector<NamedTensor> in{{"x", random_tensor(rng, {3, 2})}};
    auto probe = random_tensor(rng, {2, 3}, false);
    auto f = [&] {
      auto t = transpose(in[0].tensor);
      auto g = gather(in[0].tensor, {0, 0, 5, 2, 3, 1}, {2, 3});
      return sum(mul(add(t, g), probe));
    };
    expect_passes(grad_check(f, in, primitive_options()));
  }
}

TEST(GradCheck, SumOfInputIsExact) {
  Rng rng(5);
  std::vector<NamedTensor> in{{"x", random_tensor(rng, {3, 5})}};
  auto report = grad_check([&] { return sum(in[0].tensor); }, in);
  EXPECT_LT(report.max_relative_error(), 1e-10);
}

TEST(GradCheck, FlagsWrongDerivative) {
  Rng rng(6);
  std::vector<NamedTensor> in{{"x", random_tensor(rng, {4})}};
  auto wrong_square = [&] {
    return sum(map_unary(in[0].tensor, [](double v) { return v * v; }, [](double v) { return v; }, "bad_square"));
  };
  EXPECT_FALSE(grad_check(wrong_square, in).passed());
}

TEST(GradCheck, FlagsInjectedTanhSignFault) {
  Rng rng(7);
  std::vector<NamedTensor> in{{"x", random_tensor(rng, {4})}};
  auto f = [&] { return sum(tanh(in[0].tensor)); };
  EXPECT_TRUE(grad_check(f, in).passed());
  fault::set_tanh_grad_sign_flip(true);
  const bool passed = grad_check(f, in).passed();
  fault::set_tanh_grad_sign_flip(false);
  EXPECT_FALSE(passed);
}

}  // namespace
}  // namespace pbgru
