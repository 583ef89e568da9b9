// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "pbgru/numerics/tensor.hpp"

namespace pbgru {

struct GradCheckOptions {
  double step = 1e-5;
  double tolerance = 1e-4;
  /// Relative error is |analytic - numeric| / max(|analytic|, |numeric|, floor).
  /// The floor keeps near-zero gradients from turning round-off into huge
  /// ratios.
  double denominator_floor = 1e-3;
};

struct GradCheckEntry {
  std::string name;
  std::size_t count = 0;
  double max_relative_error = 0.0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  bool passed = true;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double tolerance = 0.0;

  bool passed() const;
  double max_relative_error() const;
};

/// Compares reverse-mode gradients of the scalar returned by `loss` against
/// central differences, perturbing every element of every input in place.
/// `loss` must rebuild its graph from the inputs' current values on each call.
GradCheckReport grad_check(const std::function<Tensor()>& loss, std::span<NamedTensor> inputs,
                           const GradCheckOptions& options = {});

}  // namespace pbgru
