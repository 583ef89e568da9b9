// SPDX-License-Identifier: Apache-2.0
//
// Finite-difference check of every differentiable primitive, the GRU cell
// over three steps, each branch, and the whole model on a small instance
// (T_in = 4, n = 4, hidden 8, K = 2).
#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace pbgru::train {

struct SuiteEntry {
  std::string group;  // e.g. "op.matmul", "model"
  std::string parameter;
  std::size_t count = 0;
  double max_relative_error = 0.0;
  bool passed = true;
};

struct SuiteReport {
  std::vector<SuiteEntry> entries;
  double tolerance = 0.0;
  double seconds = 0.0;

  bool passed() const;
  double max_relative_error() const;
};

SuiteReport run_gradcheck_suite(std::uint64_t seed = 0, double tolerance = 1e-4);

/// One line per group with its worst parameter, then a verdict line.
std::string suite_report_to_text(const SuiteReport& report);
std::string suite_report_to_json(const SuiteReport& report);

}  // namespace pbgru::train
