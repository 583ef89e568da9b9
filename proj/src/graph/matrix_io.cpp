// SPDX-License-Identifier: Apache-2.0
#include "pbgru/graph/matrix_io.hpp"

#include <sstream>

#include "pbgru/numerics/errors.hpp"
#include "pbgru/numerics/io_util.hpp"

namespace pbgru::graph {

std::string matrix_to_csv(const Matrix& m) {
  std::string out = "station";
  for (std::size_t j = 0; j < m.cols; ++j) out += "," + std::to_string(j);
  out += "\n";
  for (std::size_t i = 0; i < m.rows; ++i) {
    out += std::to_string(i);
    for (std::size_t j = 0; j < m.cols; ++j) out += "," + format_double(m(i, j));
    out += "\n";
  }
  return out;
}

Matrix matrix_from_csv(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  if (!std::getline(in, line)) throw DataError("matrix CSV is empty");
  const auto header = split_csv_line(line);
  if (header.empty() || header[0] != "station") throw DataError("matrix CSV header must start with 'station'");
  const std::size_t cols = header.size() - 1;
  for (std::size_t j = 0; j < cols; ++j) {
    if (parse_int(header[j + 1], "matrix column id") != static_cast<long long>(j)) {
      throw DataError("matrix CSV header ids must be 0..n-1 in order");
    }
  }
  Matrix m(0, cols);
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != cols + 1) throw DataError("matrix CSV row " + std::to_string(row + 2) + " has wrong width");
    if (parse_int(fields[0], "matrix row id") != static_cast<long long>(row)) {
      throw DataError("matrix CSV row ids must be 0..n-1 in order");
    }
    for (std::size_t j = 0; j < cols; ++j) m.data.push_back(parse_double(fields[j + 1], "matrix entry"));
    ++row;
  }
  m.rows = row;
  return m;
}

void write_matrix_csv(const std::filesystem::path& path, const Matrix& m) { write_text_file(path, matrix_to_csv(m)); }

Matrix read_matrix_csv(const std::filesystem::path& path) { return matrix_from_csv(read_text_file(path)); }

}  // namespace pbgru::graph
