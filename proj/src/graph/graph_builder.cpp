// SPDX-License-Identifier: Apache-2.0
#include "pbgru/graph/graph_builder.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <queue>
#include <set>
#include <string>
#include <thread>

#include "pbgru/numerics/errors.hpp"
#include "pbgru/numerics/io_util.hpp"

namespace pbgru::graph {

void StationGraph::validate() const {
  std::set<std::pair<std::size_t, std::size_t>> seen;
  for (auto [a, b] : edges) {
    if (a >= n || b >= n) {
      throw DataError("edge (" + std::to_string(a) + "," + std::to_string(b) + ") outside [0," + std::to_string(n) +
                      ")");
    }
    if (a == b) throw DataError("self-loop at station " + std::to_string(a));
    if (!seen.insert(std::minmax(a, b)).second) {
      throw DataError("duplicate edge (" + std::to_string(a) + "," + std::to_string(b) + ")");
    }
  }
}

std::vector<std::vector<int>> hop_distances(const StationGraph& g) {
  g.validate();
  std::vector<std::vector<std::size_t>> adj(g.n);
  for (auto [a, b] : g.edges) {
    adj[a].push_back(b);
    adj[b].push_back(a);
  }
  std::vector<std::vector<int>> dist(g.n, std::vector<int>(g.n, -1));
  for (std::size_t s = 0; s < g.n; ++s) {
    auto& d = dist[s];
    d[s] = 0;
    std::queue<std::size_t> q;
    q.push(s);
    while (!q.empty()) {
      const std::size_t u = q.front();
      q.pop();
      for (std::size_t v : adj[u]) {
        if (d[v] < 0) {
          d[v] = d[u] + 1;
          q.push(v);
        }
      }
    }
  }
  return dist;
}

std::vector<HopAdjacency> multi_hop_adjacencies(const StationGraph& g, std::size_t k_max) {
  if (k_max < 1) throw DataError("hop count K must be >= 1");
  const auto dist = hop_distances(g);
  std::vector<HopAdjacency> out;
  for (std::size_t k = 1; k <= k_max; ++k) {
    HopAdjacency h{k, Matrix(g.n, g.n)};
    for (std::size_t i = 0; i < g.n; ++i)
      for (std::size_t j = 0; j < g.n; ++j)
        if (dist[i][j] == static_cast<int>(k)) h.matrix(i, j) = 1.0;
    out.push_back(std::move(h));
  }
  return out;
}

HopAdjacency multi_hop_adjacency(const StationGraph& g, std::size_t k) {
  if (k < 1) throw DataError("hop count K must be >= 1");
  return std::move(multi_hop_adjacencies(g, k).back());
}

std::vector<HopDegree> multi_hop_degrees(std::span<const HopAdjacency> adjs) {
  std::vector<HopDegree> out;
  for (std::size_t idx = 0; idx < adjs.size(); ++idx) {
    const auto& a = adjs[idx];
    if (a.k != idx + 1) {
      throw DataError("hop sequence has a gap: expected hop " + std::to_string(idx + 1) + ", got " +
                      std::to_string(a.k));
    }
    if (!a.matrix.square()) throw DataError("hop adjacency must be square");
    HopDegree d{a.k, idx == 0 ? Matrix(a.matrix.rows, a.matrix.cols) : out.back().matrix};
    for (std::size_t i = 0; i < a.matrix.rows; ++i) d.matrix(i, i) += a.matrix.row_sum(i);
    out.push_back(std::move(d));
  }
  return out;
}

HopDegree multi_hop_degree(std::span<const HopAdjacency> adjs) {
  if (adjs.empty()) throw DataError("multi_hop_degree needs at least hop 1");
  return std::move(multi_hop_degrees(adjs).back());
}

double dtw_distance(std::span<const double> x, std::span<const double> y, LocalCost cost) {
  if (x.empty() || y.empty()) throw DataError("dtw_distance: empty series");
  const std::size_t m = y.size();
  constexpr double inf = std::numeric_limits<double>::infinity();
  std::vector<double> prev(m + 1, inf), cur(m + 1, inf);
  prev[0] = 0.0;
  for (std::size_t i = 1; i <= x.size(); ++i) {
    cur[0] = inf;
    const double xi = x[i - 1];
    for (std::size_t j = 1; j <= m; ++j) {
      const double diff = xi - y[j - 1];
      const double c = cost == LocalCost::absolute ? std::abs(diff) : diff * diff;
      cur[j] = c + std::min({prev[j - 1], prev[j], cur[j - 1]});
    }
    std::swap(prev, cur);
  }
  return prev[m];
}

SimilarityGraph similarity_from_distances(const Matrix& distances, const SimilarityOptions& options) {
  if (options.top_k < 1) throw DataError("similarity top-k must be >= 1");
  if (!distances.square() || distances.rows < 2) throw DataError("similarity graph needs >= 2 stations");
  const std::size_t n = distances.rows;

  double tau = options.temperature;
  if (!(tau > 0.0)) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (i != j) total += distances(i, j);
    tau = total / static_cast<double>(n * (n - 1));
    if (!(tau > 0.0)) tau = 1.0;  // every series identical
  }

  Matrix raw(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const double s = options.mode == SimilarityMode::negative_exponential ? std::exp(-distances(i, j) / tau)
                                                                            : std::exp(distances(i, j));
      if (!std::isfinite(s)) throw NumericError("similarity overflow: exp(DTW) is not representable");
      raw(i, j) = s;
    }

  SimilarityGraph out;
  out.matrix = Matrix(n, n);
  out.distances = distances;
  out.top_k = options.top_k;
  out.threshold = options.threshold;
  out.temperature = tau;
  out.mode = options.mode;
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < n; ++i) {
    order.clear();
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) order.push_back(j);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return raw(i, a) > raw(i, b); });
    for (std::size_t r = 0; r < std::min(options.top_k, order.size()); ++r) {
      const std::size_t j = order[r];
      if (raw(i, j) >= options.threshold) out.matrix(i, j) = raw(i, j);
    }
    out.matrix(i, i) = 1.0;
  }
  return out;
}

SimilarityGraph similarity_graph(const std::vector<std::vector<double>>& station_series,
                                 const SimilarityOptions& options) {
  const std::size_t n = station_series.size();
  if (n < 2) throw DataError("similarity graph needs >= 2 stations");
  if (options.top_k < 1) throw DataError("similarity top-k must be >= 1");

  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) pairs.emplace_back(i, j);

  // Each pair writes its own two cells, so the fill order cannot change the result.
  Matrix dist(n, n);
  auto work = [&](std::size_t begin, std::size_t stride) {
    for (std::size_t p = begin; p < pairs.size(); p += stride) {
      auto [i, j] = pairs[p];
      const double d = dtw_distance(station_series[i], station_series[j], options.cost);
      dist(i, j) = d;
      dist(j, i) = d;
    }
  };
  const std::size_t threads = std::clamp<std::size_t>(std::thread::hardware_concurrency(), 1, 16);
  if (threads == 1 || pairs.size() < 8) {
    work(0, 1);
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(work, t, threads);
  }
  return similarity_from_distances(dist, options);
}

ODFlowGraph od_flow_graph(std::span<const Trip> trips, std::size_t n, double prune_threshold) {
  ODFlowGraph g{Matrix(n, n), Matrix(n, n)};
  for (const Trip& t : trips) {
    if (t.origin >= n || t.destination >= n) {
      throw DataError("trip (" + std::to_string(t.origin) + "->" + std::to_string(t.destination) +
                      ") references a station outside [0," + std::to_string(n) + ")");
    }
    if (!(t.count >= 0.0) || !std::isfinite(t.count)) throw DataError("trip count must be a finite nonnegative number");
    if (t.origin == t.destination) continue;
    g.trips(t.destination, t.origin) += t.count;
  }
  for (std::size_t i = 0; i < n; ++i) {
    const double total = g.trips.row_sum(i);
    if (total <= 0.0) continue;
    for (std::size_t j = 0; j < n; ++j) {
      const double c = g.trips(i, j) / total;
      g.flow(i, j) = c < prune_threshold ? 0.0 : c;
    }
  }
  return g;
}

Matrix normalize(const Matrix& m, Normalization mode) {
  if (!m.square()) throw DataError("normalize: matrix must be square");
  for (double v : m.data) {
    if (v < 0.0) throw DataError("normalize: negative entry");
  }
  const std::size_t n = m.rows;
  std::vector<double> deg(n);
  for (std::size_t i = 0; i < n; ++i) deg[i] = m.row_sum(i);
  Matrix out(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    if (deg[i] <= 0.0) continue;
    for (std::size_t j = 0; j < n; ++j) {
      if (m(i, j) == 0.0) continue;
      if (mode == Normalization::random_walk) {
        out(i, j) = m(i, j) / deg[i];
      } else if (deg[j] > 0.0) {
        out(i, j) = m(i, j) / std::sqrt(deg[i] * deg[j]);
      }
    }
  }
  return out;
}

GraphSet GraphSet::truncated(std::size_t k) const {
  if (k < 1 || k > k_max()) throw DataError("cannot truncate graph set to K=" + std::to_string(k));
  GraphSet g = *this;
  g.hops.resize(k);
  g.degrees.resize(k);
  return g;
}

std::uint64_t GraphSet::content_hash() const {
  std::uint64_t h = fnv1a64(std::to_string(n) + "/" + std::to_string(k_max()));
  for (const auto& a : hops) h = fnv1a64(a.matrix.data, h);
  for (const auto& d : degrees) h = fnv1a64(d.matrix.data, h);
  h = fnv1a64(similarity.matrix.data, h);
  h = fnv1a64(od.flow.data, h);
  h = fnv1a64(physical_norm.data, h);
  h = fnv1a64(similarity_norm.data, h);
  return h;
}

GraphSet build_graph_set(const StationGraph& g, const std::vector<std::vector<double>>& station_series,
                         std::span<const Trip> trips, const GraphOptions& options) {
  if (station_series.size() != g.n) {
    throw DataError("graph has " + std::to_string(g.n) + " stations but " + std::to_string(station_series.size()) +
                    " series were given");
  }
  GraphSet set;
  set.n = g.n;
  set.hops = multi_hop_adjacencies(g, options.k_max);
  set.degrees = multi_hop_degrees(set.hops);
  set.similarity = similarity_graph(station_series, options.similarity);
  set.od = od_flow_graph(trips, g.n, options.od_prune_threshold);
  set.physical_norm = normalize(set.hops.front().matrix, Normalization::symmetric);
  set.similarity_norm = normalize(set.similarity.matrix, Normalization::random_walk);
  return set;
}

const char* to_string(SimilarityMode mode) {
  return mode == SimilarityMode::negative_exponential ? "negative_exponential" : "literal_exponential";
}

const char* to_string(LocalCost cost) { return cost == LocalCost::absolute ? "absolute" : "squared"; }

const char* to_string(Normalization mode) { return mode == Normalization::symmetric ? "symmetric" : "random_walk"; }

}  // namespace pbgru::graph
