// SPDX-License-Identifier: Apache-2.0
#include "pbgru/nn/batch.hpp"

#include "pbgru/numerics/errors.hpp"

namespace pbgru::nn {

BatchInput make_batch_input(std::span<const double> x, std::size_t windows, std::size_t n, std::size_t t_in) {
  if (x.size() != windows * t_in * n * 2) {
    throw ShapeError("batch input has " + std::to_string(x.size()) + " values, expected " +
                     std::to_string(windows * t_in * n * 2));
  }
  BatchInput in;
  in.windows = windows;
  in.n = n;
  in.t_in = t_in;
  const std::size_t rows = windows * n;
  auto at = [&](std::size_t b, std::size_t t, std::size_t i, std::size_t c) {
    return x[((b * t_in + t) * n + i) * 2 + c];
  };
  for (std::size_t t = 0; t < t_in; ++t) {
    std::vector<double> v(rows * 2);
    for (std::size_t b = 0; b < windows; ++b)
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t c = 0; c < 2; ++c) v[(b * n + i) * 2 + c] = at(b, t, i, c);
    in.steps.push_back(Tensor::from_values({rows, 2}, std::move(v)));
  }
  const std::size_t cols = windows * t_in;
  std::vector<double> st(n * cols * 2), inflow(n * cols);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t b = 0; b < windows; ++b)
      for (std::size_t t = 0; t < t_in; ++t) {
        const std::size_t col = b * t_in + t;
        st[(i * cols + col) * 2] = at(b, t, i, 0);
        st[(i * cols + col) * 2 + 1] = at(b, t, i, 1);
        inflow[i * cols + col] = at(b, t, i, 0);
      }
  in.stacked = Tensor::from_values({n, cols * 2}, std::move(st));
  in.inflow = Tensor::from_values({n, cols}, std::move(inflow));
  return in;
}

Tensor make_target(std::span<const double> y, std::size_t windows, std::size_t n, std::size_t t_out) {
  if (y.size() != windows * t_out * n * 2) throw ShapeError("target block has the wrong size");
  std::vector<double> v(windows * n * 2 * t_out);
  for (std::size_t b = 0; b < windows; ++b)
    for (std::size_t t = 0; t < t_out; ++t)
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t c = 0; c < 2; ++c)
          v[(b * n + i) * 2 * t_out + c * t_out + t] = y[((b * t_out + t) * n + i) * 2 + c];
  return Tensor::from_values({windows * n, 2 * t_out}, std::move(v));
}

std::vector<double> unpack_prediction(const Tensor& pred, std::size_t windows, std::size_t n, std::size_t t_out) {
  if (pred.shape() != Shape{windows * n, 2 * t_out})
    throw ShapeError("prediction has shape " + shape_str(pred.shape()));
  const auto v = pred.values();
  std::vector<double> y(windows * t_out * n * 2);
  for (std::size_t b = 0; b < windows; ++b)
    for (std::size_t t = 0; t < t_out; ++t)
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t c = 0; c < 2; ++c)
          y[((b * t_out + t) * n + i) * 2 + c] = v[(b * n + i) * 2 * t_out + c * t_out + t];
  return y;
}

}  // namespace pbgru::nn
