// SPDX-License-Identifier: Apache-2.0
//
// Dense matrix CSV: a header row "station,0,1,...,n-1" followed by one row per
// station "i,v_i0,...". Values use shortest round-trip formatting, so a
// write/read cycle reproduces every double exactly.
#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "pbgru/numerics/matrix.hpp"

namespace pbgru::graph {

std::string matrix_to_csv(const Matrix& m);
Matrix matrix_from_csv(std::string_view text);

void write_matrix_csv(const std::filesystem::path& path, const Matrix& m);
Matrix read_matrix_csv(const std::filesystem::path& path);

}  // namespace pbgru::graph
