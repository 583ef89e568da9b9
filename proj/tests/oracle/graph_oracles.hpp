// SPDX-License-Identifier: Apache-2.0
//
// Independent reference computations for graph construction. These share no
// code with src/graph and use deliberately different algorithms.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <utility>
#include <vector>

#include "pbgru/numerics/rng.hpp"

namespace pbgru::oracle {

/// Floyd-Warshall hop counts; -1 where unreachable.
inline std::vector<std::vector<int>> floyd_warshall_hops(
    std::size_t n, const std::vector<std::pair<std::size_t, std::size_t>>& edges) {
  const int inf = std::numeric_limits<int>::max() / 4;
  std::vector<std::vector<int>> d(n, std::vector<int>(n, inf));
  for (std::size_t i = 0; i < n; ++i) d[i][i] = 0;
  for (auto [a, b] : edges) d[a][b] = d[b][a] = 1;
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) d[i][j] = std::min(d[i][j], d[i][k] + d[k][j]);
  for (auto& row : d)
    for (int& v : row)
      if (v >= inf) v = -1;
  return d;
}

/// Random simple undirected graph, possibly disconnected.
inline std::vector<std::pair<std::size_t, std::size_t>> random_edges(Rng& rng, std::size_t n, double p) {
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (rng.bernoulli(p)) edges.emplace_back(i, j);
  return edges;
}

namespace detail {
inline void enumerate_paths(const std::vector<double>& x, const std::vector<double>& y, std::size_t i, std::size_t j,
                            double acc, double& best) {
  acc += std::abs(x[i] - y[j]);
  if (i + 1 == x.size() && j + 1 == y.size()) {
    best = std::min(best, acc);
    return;
  }
  if (i + 1 < x.size()) enumerate_paths(x, y, i + 1, j, acc, best);
  if (j + 1 < y.size()) enumerate_paths(x, y, i, j + 1, acc, best);
  if (i + 1 < x.size() && j + 1 < y.size()) enumerate_paths(x, y, i + 1, j + 1, acc, best);
}
}  // namespace detail

/// Minimum absolute-cost over every monotone warping path, by exhaustive
/// enumeration. Exponential; for short series only.
inline double brute_force_dtw(const std::vector<double>& x, const std::vector<double>& y) {
  double best = std::numeric_limits<double>::infinity();
  detail::enumerate_paths(x, y, 0, 0, 0.0, best);
  return best;
}

}  // namespace pbgru::oracle
