// SPDX-License-Identifier: Apache-2.0
#include "pbgru/numerics/grad_check.hpp"

#include <algorithm>
#include <cmath>

#include "pbgru/numerics/errors.hpp"

namespace pbgru {

bool GradCheckReport::passed() const {
  return std::all_of(entries.begin(), entries.end(), [](const GradCheckEntry& e) { return e.passed; });
}

double GradCheckReport::max_relative_error() const {
  double worst = 0.0;
  for (const auto& e : entries) worst = std::max(worst, e.max_relative_error);
  return worst;
}

GradCheckReport grad_check(const std::function<Tensor()>& loss, std::span<NamedTensor> inputs,
                           const GradCheckOptions& options) {
  for (auto& in : inputs) {
    if (!in.tensor.requires_grad() || !in.tensor.is_leaf()) {
      throw ShapeError("grad_check: input '" + in.name + "' must be a tracked leaf");
    }
    in.tensor.zero_grad();
  }
  loss().backward();

  GradCheckReport report;
  report.tolerance = options.tolerance;
  for (auto& in : inputs) {
    const std::vector<double> analytic(in.tensor.grad().begin(), in.tensor.grad().end());
    auto values = in.tensor.mutable_values();
    GradCheckEntry entry;
    entry.name = in.name;
    entry.count = values.size();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double original = values[i];
      values[i] = original + options.step;
      const double plus = loss().item();
      values[i] = original - options.step;
      const double minus = loss().item();
      values[i] = original;
      const double numeric = (plus - minus) / (2.0 * options.step);
      const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), options.denominator_floor});
      const double rel = std::abs(analytic[i] - numeric) / denom;
      if (i == 0 || rel > entry.max_relative_error) {
        entry.max_relative_error = rel;
        entry.worst_index = i;
        entry.analytic = analytic[i];
        entry.numeric = numeric;
      }
    }
    entry.passed = entry.max_relative_error <= options.tolerance;
    report.entries.push_back(std::move(entry));
    in.tensor.zero_grad();
  }
  return report;
}

}  // namespace pbgru
