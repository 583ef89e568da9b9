// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace pbgru {

/// Operand shapes are incompatible with the requested operation.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A value or gradient became non-finite, or an update was refused.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input files or in-memory datasets violate their schema.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Run configuration is invalid, inconsistent, or mismatched with artifacts.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace pbgru
