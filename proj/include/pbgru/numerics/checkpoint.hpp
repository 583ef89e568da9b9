// SPDX-License-Identifier: Apache-2.0
//
// Checkpoint file layout (all integers and reals little-endian):
//
//   bytes 0..7   magic "PBGRUCK1"
//   u32          entry count
//   per entry:
//     u32        name length, then the UTF-8 name bytes
//     u32        rank, then rank x u64 dimensions
//     f64        product(dims) values, row-major
//
// Entries keep the order they were written in; names must be unique.
#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "pbgru/numerics/tensor.hpp"

namespace pbgru {

struct CheckpointEntry {
  std::string name;
  Shape shape;
  std::vector<double> values;

  bool operator==(const CheckpointEntry&) const = default;
};

std::string encode_checkpoint(std::span<const NamedTensor> params);
std::vector<CheckpointEntry> decode_checkpoint(std::string_view bytes);

void write_checkpoint(const std::filesystem::path& path, std::span<const NamedTensor> params);
std::vector<CheckpointEntry> read_checkpoint(const std::filesystem::path& path);

/// Copies checkpoint values into params; names and shapes must match one to
/// one, otherwise a DataError lists the first discrepancy.
void load_checkpoint_into(std::span<NamedTensor> params, const std::vector<CheckpointEntry>& entries);

}  // namespace pbgru
