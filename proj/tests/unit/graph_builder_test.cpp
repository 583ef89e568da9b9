// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <set>

#include "../oracle/graph_oracles.hpp"
#include "pbgru/graph/graph_builder.hpp"
#include "pbgru/graph/matrix_io.hpp"
#include "pbgru/numerics/errors.hpp"

namespace pbgru::graph {
namespace {

StationGraph path3() { return {3, {{0, 1}, {1, 2}}}; }

std::set<std::pair<std::size_t, std::size_t>> support(const Matrix& m) {
  std::set<std::pair<std::size_t, std::size_t>> s;
  for (std::size_t i = 0; i < m.rows; ++i)
    for (std::size_t j = 0; j < m.cols; ++j)
      if (m(i, j) != 0.0) s.emplace(i, j);
  return s;
}

TEST(StationGraph, RejectsInvalidEdges) {
  EXPECT_THROW((StationGraph{3, {{0, 3}}}.validate()), DataError);
  EXPECT_THROW((StationGraph{3, {{1, 1}}}.validate()), DataError);
  EXPECT_THROW((StationGraph{3, {{0, 1}, {1, 0}}}.validate()), DataError);
}

TEST(MultiHopAdjacency, PathFirstHopIsDirectEdges) {
  auto a = multi_hop_adjacency(path3(), 1);
  using P = std::pair<std::size_t, std::size_t>;
  EXPECT_EQ(support(a.matrix), (std::set<P>{{0, 1}, {1, 0}, {1, 2}, {2, 1}}));
}

TEST(MultiHopAdjacency, PathSecondHopIsEndpoints) {
  auto a = multi_hop_adjacency(path3(), 2);
  using P = std::pair<std::size_t, std::size_t>;
  EXPECT_EQ(support(a.matrix), (std::set<P>{{0, 2}, {2, 0}}));
}

TEST(MultiHopAdjacency, RejectsZeroHops) { EXPECT_THROW(multi_hop_adjacency(path3(), 0), DataError); }

TEST(MultiHopAdjacency, EdgeListOfHangzhouSizeGivesSymmetricStorage) {
  // A connected 80-station network with 248 undirected edges, the published
  // size of the Hangzhou system, stores 2 x 248 first-hop nonzeros.
  Rng rng(248);
  StationGraph g{80, {}};
  std::set<std::pair<std::size_t, std::size_t>> seen;
  for (std::size_t i = 1; i < 80; ++i) {
    const std::size_t j = rng.below(i);
    g.edges.emplace_back(j, i);
    seen.emplace(j, i);
  }
  while (g.edges.size() < 248) {
    std::size_t a = rng.below(80), b = rng.below(80);
    if (a == b) continue;
    if (seen.emplace(std::min(a, b), std::max(a, b)).second) g.edges.emplace_back(a, b);
  }
  EXPECT_EQ(multi_hop_adjacency(g, 1).matrix.nonzeros(), 2u * 248u);
}

TEST(MultiHopAdjacency, MatchesFloydWarshallOracleOnRandomGraphs) {
  for (std::uint64_t seed = 0; seed < 60; ++seed) {
    Rng rng(seed);
    const std::size_t n = 2 + rng.below(20);
    StationGraph g{n, oracle::random_edges(rng, n, rng.uniform(0.05, 0.4))};
    const auto dist = oracle::floyd_warshall_hops(n, g.edges);
    const auto hops = multi_hop_adjacencies(g, 10);
    for (const auto& h : hops) {
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
          EXPECT_EQ(h.matrix(i, j), dist[i][j] == static_cast<int>(h.k) ? 1.0 : 0.0);
          EXPECT_EQ(h.matrix(i, j), h.matrix(j, i));
        }
      for (const auto& other : hops)
        if (other.k != h.k) {
          EXPECT_EQ(hadamard(h.matrix, other.matrix).nonzeros(), 0u);
        }
    }
  }
}

TEST(MultiHopDegree, PathExamples) {
  auto hops = multi_hop_adjacencies(path3(), 2);
  auto d1 = multi_hop_degree(std::span(hops).first(1));
  auto d2 = multi_hop_degree(hops);
  EXPECT_EQ(d1.matrix(0, 0), 1.0);
  EXPECT_EQ(d1.matrix(1, 1), 2.0);
  EXPECT_EQ(d1.matrix(2, 2), 1.0);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(d2.matrix(i, i), 2.0);
  EXPECT_EQ(d2.matrix(0, 1), 0.0);
}

TEST(MultiHopDegree, RejectsGapInHops) {
  auto hops = multi_hop_adjacencies(path3(), 2);
  std::vector<HopAdjacency> gap{hops[1]};
  EXPECT_THROW(multi_hop_degree(gap), DataError);
}

TEST(MultiHopDegree, RecursionEqualsCumulativeFormulaAndReachability) {
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    Rng rng(1000 + seed);
    const std::size_t n = 2 + rng.below(18);
    StationGraph g{n, oracle::random_edges(rng, n, rng.uniform(0.05, 0.3))};
    const auto hops = multi_hop_adjacencies(g, 10);
    const auto degrees = multi_hop_degrees(hops);
    const auto dist = oracle::floyd_warshall_hops(n, g.edges);
    for (std::size_t k = 1; k <= 10; ++k) {
      for (std::size_t i = 0; i < n; ++i) {
        double direct = 0.0;
        for (std::size_t kk = 1; kk <= k; ++kk) direct += hops[kk - 1].matrix.row_sum(i);
        EXPECT_EQ(degrees[k - 1].matrix(i, i), direct);
        int within = 0;
        for (std::size_t j = 0; j < n; ++j) within += (dist[i][j] >= 1 && dist[i][j] <= static_cast<int>(k));
        EXPECT_EQ(degrees[k - 1].matrix(i, i), within);
        for (std::size_t j = 0; j < n; ++j)
          if (j != i) {
            EXPECT_EQ(degrees[k - 1].matrix(i, j), 0.0);
          }
      }
    }
  }
}

TEST(Dtw, IdenticalSeriesHaveZeroDistance) {
  std::vector<double> x{3.0, -1.0, 2.5, 2.5};
  EXPECT_EQ(dtw_distance(x, x), 0.0);
}

TEST(Dtw, HandComputedExamples) {
  EXPECT_EQ(dtw_distance(std::vector<double>{0, 0, 0}, std::vector<double>{1, 1, 1}), 3.0);
  EXPECT_EQ(dtw_distance(std::vector<double>{1, 2, 3}, std::vector<double>{1, 2, 2, 3}), 0.0);
  EXPECT_EQ(oracle::brute_force_dtw({0, 0, 0}, {1, 1, 1}), 3.0);
  EXPECT_EQ(oracle::brute_force_dtw({1, 2, 3}, {1, 2, 2, 3}), 0.0);
}

TEST(Dtw, RejectsEmptySeries) {
  EXPECT_THROW(dtw_distance(std::vector<double>{}, std::vector<double>{1.0}), DataError);
}

TEST(Dtw, SymmetricAndMatchesExhaustiveEnumeration) {
  Rng rng(55);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<double> x(1 + rng.below(6)), y(1 + rng.below(6));
    for (double& v : x) v = rng.uniform(-3.0, 3.0);
    for (double& v : y) v = rng.uniform(-3.0, 3.0);
    const double d = dtw_distance(x, y);
    EXPECT_EQ(d, dtw_distance(y, x));
    EXPECT_NEAR(d, oracle::brute_force_dtw(x, y), 1e-12);
  }
}

TEST(Similarity, IdenticalSeriesAreFullySimilar) {
  std::vector<std::vector<double>> series{{1, 2, 3}, {1, 2, 3}, {5, 5, 9}};
  auto s = similarity_graph(series, {.top_k = 2, .threshold = 0.0});
  EXPECT_EQ(s.matrix(0, 1), 1.0);
  EXPECT_EQ(s.matrix(1, 0), 1.0);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(s.matrix(i, i), 1.0);
}

TEST(Similarity, TopOneKeepsBestOffDiagonalNeighbor) {
  std::vector<std::vector<double>> series{{0, 1, 2, 1}, {0, 1, 2, 2}, {40, -30, 55, 90}};
  std::vector<std::vector<double>> dist(3, std::vector<double>(3));
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) dist[i][j] = oracle::brute_force_dtw(series[i], series[j]);
  auto s = similarity_graph(series, {.top_k = 1, .threshold = 0.0});
  for (std::size_t i = 0; i < 3; ++i) {
    std::size_t best = i == 0 ? 1 : 0;
    for (std::size_t j = 0; j < 3; ++j)
      if (j != i && dist[i][j] < dist[i][best]) best = j;
    for (std::size_t j = 0; j < 3; ++j) {
      if (j == i) continue;
      if (j == best) {
        EXPECT_GT(s.matrix(i, j), 0.0);
      } else {
        EXPECT_EQ(s.matrix(i, j), 0.0) << i << "," << j;
      }
    }
  }
  // Stations 0 and 1 are each other's best match; the outlier picks one of them.
  EXPECT_GT(s.matrix(0, 1), 0.0);
  EXPECT_GT(s.matrix(1, 0), 0.0);
}

TEST(Similarity, InfiniteTemperatureLimitMakesEverythingSimilar) {
  std::vector<std::vector<double>> series{{0, 1}, {5, 7}, {-3, 2}};
  auto s = similarity_graph(series, {.top_k = 2, .threshold = 0.0, .temperature = 1e300});
  for (double v : s.matrix.data) EXPECT_DOUBLE_EQ(v, 1.0);
}

TEST(Similarity, FilteredRowsRespectTopKAndThreshold) {
  Rng rng(8);
  std::vector<std::vector<double>> series(12, std::vector<double>(10));
  for (auto& s : series)
    for (double& v : s) v = rng.normal();
  SimilarityOptions opt{.top_k = 3, .threshold = 0.4};
  auto s = similarity_graph(series, opt);
  for (std::size_t i = 0; i < 12; ++i) {
    std::size_t off = 0;
    for (std::size_t j = 0; j < 12; ++j) {
      if (i == j) continue;
      if (s.matrix(i, j) != 0.0) {
        ++off;
        EXPECT_GE(s.matrix(i, j), opt.threshold);
        EXPECT_LE(s.matrix(i, j), s.matrix(i, i));
      }
    }
    EXPECT_LE(off, opt.top_k);
  }
}

TEST(Similarity, LiteralModeGrowsWithDistance) {
  std::vector<std::vector<double>> series{{0, 0}, {0, 1}, {0, 3}};
  auto s = similarity_graph(series, {.top_k = 2, .threshold = 0.0, .mode = SimilarityMode::literal_exponential});
  EXPECT_DOUBLE_EQ(s.matrix(0, 1), std::exp(1.0));
  EXPECT_DOUBLE_EQ(s.matrix(0, 2), std::exp(3.0));
}

TEST(Similarity, RejectsBadArguments) {
  EXPECT_THROW(similarity_graph({{1.0}}), DataError);
  EXPECT_THROW(similarity_graph({{1.0}, {2.0}}, {.top_k = 0}), DataError);
}

TEST(OdFlow, RowArithmetic) {
  // Destination 1 receives 10 from station 0 and 30 from station 2.
  std::vector<Trip> trips{{0, 1, 10}, {2, 1, 30}};
  auto g = od_flow_graph(trips, 3, 0.0);
  EXPECT_EQ(g.flow(1, 0), 0.25);
  EXPECT_EQ(g.flow(1, 1), 0.0);
  EXPECT_EQ(g.flow(1, 2), 0.75);
  EXPECT_EQ(g.flow.row_sum(0), 0.0);
}

TEST(OdFlow, NoTripsGivesZeroMatrix) {
  auto g = od_flow_graph({}, 4);
  EXPECT_EQ(g.flow.nonzeros(), 0u);
}

TEST(OdFlow, RejectsOutOfRangeStations) {
  std::vector<Trip> trips{{0, 5, 1}};
  EXPECT_THROW(od_flow_graph(trips, 3), DataError);
}

TEST(OdFlow, MatchesIndependentTallyOnRandomLogs) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    Rng rng(seed);
    std::vector<Trip> trips;
    for (int t = 0; t < 40; ++t) trips.push_back({rng.below(5), rng.below(5), static_cast<double>(rng.below(50))});
    auto g = od_flow_graph(trips, 5, 0.0);
    std::map<std::pair<std::size_t, std::size_t>, double> tally;
    std::map<std::size_t, double> inbound;
    for (const auto& t : trips) {
      if (t.origin == t.destination) continue;
      tally[{t.destination, t.origin}] += t.count;
      inbound[t.destination] += t.count;
    }
    for (std::size_t i = 0; i < 5; ++i) {
      EXPECT_LE(g.flow.row_sum(i), 1.0 + 1e-9);
      for (std::size_t j = 0; j < 5; ++j) {
        const double expected = inbound[i] > 0 ? tally[{i, j}] / inbound[i] : 0.0;
        EXPECT_NEAR(g.flow(i, j), expected, 1e-12);
      }
    }
    auto pruned = od_flow_graph(trips, 5, 0.2);
    for (std::size_t i = 0; i < 5; ++i) {
      EXPECT_LE(pruned.flow.row_sum(i), 1.0 + 1e-9);
      for (double v : std::span(pruned.flow.data).subspan(i * 5, 5)) EXPECT_TRUE(v == 0.0 || v >= 0.2);
    }
  }
}

TEST(Normalize, SingleEdgeSymmetricIsUnchanged) {
  Matrix a(2, 2);
  a(0, 1) = a(1, 0) = 1.0;
  EXPECT_EQ(normalize(a, Normalization::symmetric), a);
}

TEST(Normalize, RandomWalkRowNormalizes) {
  Matrix s(2, 2);
  s(0, 1) = s(1, 0) = 2.0;
  auto r = normalize(s, Normalization::random_walk);
  EXPECT_EQ(r(0, 1), 1.0);
  EXPECT_EQ(r(1, 0), 1.0);
  EXPECT_EQ(r(0, 0), 0.0);
}

TEST(Normalize, IsolatedNodeStaysZero) {
  Matrix a(3, 3);
  a(0, 1) = a(1, 0) = 1.0;
  for (auto mode : {Normalization::symmetric, Normalization::random_walk}) {
    auto r = normalize(a, mode);
    for (std::size_t j = 0; j < 3; ++j) {
      EXPECT_EQ(r(2, j), 0.0);
      EXPECT_TRUE(std::isfinite(r(j, 2)));
    }
  }
}

TEST(Normalize, RejectsNegativeEntries) {
  Matrix a(2, 2);
  a(0, 1) = -1.0;
  EXPECT_THROW(normalize(a, Normalization::symmetric), DataError);
}

TEST(MatrixCsv, RoundTripsExactly) {
  Rng rng(4);
  Matrix m(4, 4);
  for (double& v : m.data) v = rng.normal() * 1e-3;
  auto text = matrix_to_csv(m);
  EXPECT_EQ(text.substr(0, 18), "station,0,1,2,3\n0,");
  EXPECT_EQ(matrix_from_csv(text), m);
  EXPECT_EQ(matrix_to_csv(matrix_from_csv(text)), text);
}

}  // namespace
}  // namespace pbgru::graph
