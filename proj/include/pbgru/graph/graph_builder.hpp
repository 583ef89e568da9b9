// SPDX-License-Identifier: Apache-2.0
//
// Predefined station graphs: exact-distance hop adjacencies, DTW flow-pattern
// similarity, OD flow-direction fractions, cumulative multi-hop degrees, and
// their normalized operators.
#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pbgru/numerics/matrix.hpp"

namespace pbgru::graph {

/// Undirected physical network. Ids in [0, n); no self-loops or duplicates.
struct StationGraph {
  std::size_t n = 0;
  std::vector<std::pair<std::size_t, std::size_t>> edges;

  /// Throws DataError on any invariant violation.
  void validate() const;
};

/// All-pairs BFS hop counts; -1 marks unreachable pairs.
std::vector<std::vector<int>> hop_distances(const StationGraph& g);

struct HopAdjacency {
  std::size_t k = 0;
  Matrix matrix;  // 1 exactly where shortest-path distance == k
};

HopAdjacency multi_hop_adjacency(const StationGraph& g, std::size_t k);
/// Hops 1..k_max, sharing one BFS pass.
std::vector<HopAdjacency> multi_hop_adjacencies(const StationGraph& g, std::size_t k_max);

struct HopDegree {
  std::size_t k = 0;
  Matrix matrix;  // diagonal
};

/// D(1) = deg(A(1)); D(k) = D(k-1) + deg(A(k)). Input must cover hops 1..K in
/// order.
std::vector<HopDegree> multi_hop_degrees(std::span<const HopAdjacency> adjs);
HopDegree multi_hop_degree(std::span<const HopAdjacency> adjs);

enum class LocalCost { absolute, squared };

/// Classic full-band DTW with steps {match, insertion, deletion}.
double dtw_distance(std::span<const double> x, std::span<const double> y, LocalCost cost = LocalCost::absolute);

enum class SimilarityMode {
  /// exp(-DTW / tau), tau = mean off-diagonal DTW distance.
  negative_exponential,
  /// exp(DTW), exactly as the formula is usually printed.
  literal_exponential,
};

struct SimilarityOptions {
  std::size_t top_k = 10;
  double threshold = 0.1;
  SimilarityMode mode = SimilarityMode::negative_exponential;
  LocalCost cost = LocalCost::absolute;
  /// Overrides the mean-distance temperature when > 0.
  double temperature = 0.0;
};

struct SimilarityGraph {
  Matrix matrix;     // filtered similarities, diagonal 1
  Matrix distances;  // raw pairwise DTW
  std::size_t top_k = 0;
  double threshold = 0.0;
  double temperature = 0.0;
  SimilarityMode mode = SimilarityMode::negative_exponential;
};

/// Pairwise DTW over per-station series, mapped to similarities, then per row
/// the top-k off-diagonal entries are kept and entries below threshold
/// dropped. The diagonal is always 1.
SimilarityGraph similarity_graph(const std::vector<std::vector<double>>& station_series,
                                 const SimilarityOptions& options = {});
/// Similarity from an existing distance matrix (same mapping and filter).
SimilarityGraph similarity_from_distances(const Matrix& distances, const SimilarityOptions& options = {});

struct Trip {
  std::size_t origin = 0;
  std::size_t destination = 0;
  double count = 0.0;
};

struct ODFlowGraph {
  Matrix trips;  // F(i, j): passengers travelling j -> i
  Matrix flow;   // C(i, j) = F(i, j) / sum_m F(i, m), pruned
};

/// Same-station trips are ignored. Entries of C below prune_threshold are
/// zeroed after normalization.
ODFlowGraph od_flow_graph(std::span<const Trip> trips, std::size_t n, double prune_threshold = 0.01);

enum class Normalization {
  symmetric,    // D^-1/2 A D^-1/2
  random_walk,  // D^-1 A
};

/// Degrees are the matrix's own row sums; zero-degree rows stay zero.
Matrix normalize(const Matrix& m, Normalization mode);

struct GraphOptions {
  std::size_t k_max = 5;
  SimilarityOptions similarity;
  double od_prune_threshold = 0.01;
};

/// Everything the model consumes, built from training-period inputs only.
struct GraphSet {
  std::size_t n = 0;
  std::vector<HopAdjacency> hops;  // 1..k_max
  std::vector<HopDegree> degrees;  // 1..k_max
  SimilarityGraph similarity;
  ODFlowGraph od;
  Matrix physical_norm;    // symmetric-normalized A(1)
  Matrix similarity_norm;  // random-walk-normalized S

  std::size_t k_max() const { return hops.size(); }
  /// Restriction to hops 1..k (k <= k_max).
  GraphSet truncated(std::size_t k) const;
  /// Hash over every matrix, used as graph provenance.
  std::uint64_t content_hash() const;
};

GraphSet build_graph_set(const StationGraph& g, const std::vector<std::vector<double>>& station_series,
                         std::span<const Trip> trips, const GraphOptions& options);

const char* to_string(SimilarityMode mode);
const char* to_string(LocalCost cost);
const char* to_string(Normalization mode);

}  // namespace pbgru::graph
