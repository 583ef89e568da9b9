// SPDX-License-Identifier: Apache-2.0
#include "pbgru/cli/pipeline.hpp"

#include <json.hpp>

#include <cmath>
#include <ostream>

#include "pbgru/graph/matrix_io.hpp"
#include "pbgru/numerics/errors.hpp"
#include "pbgru/numerics/io_util.hpp"

namespace pbgru::cli {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

SplitDays resolve_split(const DataConfig& cfg, std::size_t total_days) {
  SplitDays s{cfg.train_days, cfg.val_days, cfg.test_days};
  if (s.train + s.val + s.test == 0) {
    s.val = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(0.1 * static_cast<double>(total_days))));
    s.test = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(0.2 * static_cast<double>(total_days))));
    if (s.val + s.test >= total_days) {
      throw DataError("need at least 3 days of data for the default split, got " + std::to_string(total_days));
    }
    s.train = total_days - s.val - s.test;
  }
  if (s.train + s.val + s.test > total_days) {
    throw DataError("split asks for " + std::to_string(s.train + s.val + s.test) + " days but the data has " +
                    std::to_string(total_days));
  }
  return s;
}

PreparedData prepare_data(const RunConfig& cfg) {
  PreparedData p;
  if (cfg.data.ridership.empty()) {
    const auto metro = data::synth_metro(cfg.effective_synth());
    p.raw = metro.dataset;
    p.network = metro.graph;
    p.trips = data::aggregate_trips(metro, 0, resolve_split(cfg.data, p.raw.num_days()).train);
  } else {
    p.raw = data::load_ridership_csv(cfg.data.ridership, cfg.data.load);
    p.network = data::parse_edges_csv(read_text_file(cfg.data.edges), p.raw.n);
    p.trips = data::parse_trips_csv(read_text_file(cfg.data.trips));
    for (const auto& t : p.trips) {
      if (t.origin >= p.raw.n || t.destination >= p.raw.n) {
        throw DataError("trips reference station " + std::to_string(std::max(t.origin, t.destination)) +
                        " outside 0.." + std::to_string(p.raw.n - 1));
      }
    }
  }
  const auto days = resolve_split(cfg.data, p.raw.num_days());
  p.split = data::chronological_split(p.raw, days.train, days.val, days.test);
  p.stats = data::fit_zscore(p.split.train);
  const std::size_t t_in = cfg.model.t_in, t_out = cfg.model.t_out;
  p.train.n = p.raw.n;
  p.train.stats = p.stats;
  p.train.train = data::make_windows(data::apply_zscore(p.split.train, p.stats), t_in, t_out);
  if (p.train.train.empty()) throw DataError("training split yields no windows; check t_in, t_out and steps per day");
  if (days.val > 0) p.train.val = data::make_windows(data::apply_zscore(p.split.val, p.stats), t_in, t_out);
  if (days.test > 0) p.test = data::make_windows(data::apply_zscore(p.split.test, p.stats), t_in, t_out);
  return p;
}

void check_stats_fit_on_train(const data::ZScoreStats& stats, const data::Split& split) {
  const auto expected = data::fit_zscore(split.train);
  bool same = stats.mean.size() == expected.mean.size() && stats.std.size() == expected.std.size();
  for (std::size_t c = 0; same && c < expected.mean.size(); ++c) {
    const double tol = 1e-9 * std::max(1.0, std::abs(expected.mean[c]));
    same = std::abs(stats.mean[c] - expected.mean[c]) <= tol &&
           std::abs(stats.std[c] - expected.std[c]) <= 1e-9 * std::max(1.0, expected.std[c]);
  }
  if (!same) {
    throw DataError("Z-score statistics do not match the training split (" + expected.fit_first_day + " to " +
                    expected.fit_last_day + "); they were fitted on other days");
  }
}

graph::GraphSet build_graphs(const RunConfig& cfg, const PreparedData& data, std::size_t k_max) {
  graph::GraphOptions opts;
  opts.k_max = k_max;
  opts.similarity = cfg.graph.similarity;
  opts.od_prune_threshold = cfg.graph.od_prune_threshold;
  const auto series = data::station_series(data::apply_zscore(data.split.train, data.stats), cfg.graph.series);
  return graph::build_graph_set(data.network, series, data.trips, opts);
}

bool hop_supports_disjoint(const graph::GraphSet& graphs) {
  const std::size_t n = graphs.n;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      int hits = 0;
      for (const auto& h : graphs.hops) hits += h.matrix(i, j) != 0.0;
      if (hits > 1 || (i == j && hits > 0)) return false;
    }
  return true;
}

namespace {

std::string hop_file(const char* stem, std::size_t k) {
  return std::string(stem) + "_hop" + std::to_string(k) + ".csv";
}

double max_row_sum(const Matrix& m) {
  double best = 0.0;
  for (std::size_t i = 0; i < m.rows; ++i) best = std::max(best, m.row_sum(i));
  return best;
}

}  // namespace

std::vector<std::string> write_graphs(const fs::path& dir, const graph::GraphSet& graphs, const RunConfig& cfg,
                                      const PreparedData& data) {
  fs::create_directories(dir);
  for (const auto& entry : fs::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    if (name.find("_hop") != std::string::npos && entry.path().extension() == ".csv") fs::remove(entry.path());
  }
  std::vector<std::string> files;
  auto put = [&](const std::string& name, const Matrix& m) {
    graph::write_matrix_csv(dir / name, m);
    files.push_back(name);
  };
  for (std::size_t k = 0; k < graphs.k_max(); ++k) put(hop_file("adjacency", k + 1), graphs.hops[k].matrix);
  for (std::size_t k = 0; k < graphs.k_max(); ++k) put(hop_file("degree", k + 1), graphs.degrees[k].matrix);
  put("similarity.csv", graphs.similarity.matrix);
  put("similarity_distances.csv", graphs.similarity.distances);
  put("od_trips.csv", graphs.od.trips);
  put("od_flow.csv", graphs.od.flow);
  put("physical_norm.csv", graphs.physical_norm);
  put("similarity_norm.csv", graphs.similarity_norm);

  Json j;
  j["stations"] = graphs.n;
  j["k_max"] = graphs.k_max();
  j["content_hash"] = hex64(graphs.content_hash());
  j["inputs_hash"] = graph_inputs_hash(cfg);
  j["fit_days"] = {data.stats.fit_first_day, data.stats.fit_last_day};
  j["similarity"] = {{"top_k", graphs.similarity.top_k},
                     {"threshold", graphs.similarity.threshold},
                     {"mode", graph::to_string(graphs.similarity.mode)},
                     {"dtw_cost", graph::to_string(cfg.graph.similarity.cost)},
                     {"temperature", graphs.similarity.temperature},
                     {"series_channels", data::to_string(cfg.graph.series)}};
  j["od_prune_threshold"] = cfg.graph.od_prune_threshold;
  j["checks"] = {{"hop_supports_disjoint", hop_supports_disjoint(graphs)},
                 {"od_flow_max_row_sum", max_row_sum(graphs.od.flow)}};
  j["files"] = files;
  write_text_file(dir / "graphs.json", j.dump(2) + "\n");
  files.push_back("graphs.json");
  return files;
}

bool graphs_exist(const fs::path& dir) { return fs::exists(dir / "graphs.json"); }

GraphFiles read_graphs(const fs::path& dir) {
  if (!graphs_exist(dir)) throw DataError("no graphs in " + dir.string() + "; run build-graphs first");
  Json j;
  try {
    j = Json::parse(read_text_file(dir / "graphs.json"));
  } catch (const nlohmann::json::exception& e) {
    throw DataError("graphs.json is malformed: " + std::string(e.what()));
  }
  GraphFiles out;
  auto& g = out.graphs;
  try {
    out.inputs_hash = j.at("inputs_hash").get<std::string>();
    g.n = j.at("stations").get<std::size_t>();
    const auto k_max = j.at("k_max").get<std::size_t>();
    for (std::size_t k = 1; k <= k_max; ++k) {
      g.hops.push_back({k, graph::read_matrix_csv(dir / hop_file("adjacency", k))});
      g.degrees.push_back({k, graph::read_matrix_csv(dir / hop_file("degree", k))});
    }
    const auto& s = j.at("similarity");
    g.similarity.matrix = graph::read_matrix_csv(dir / "similarity.csv");
    g.similarity.distances = graph::read_matrix_csv(dir / "similarity_distances.csv");
    g.similarity.top_k = s.at("top_k").get<std::size_t>();
    g.similarity.threshold = s.at("threshold").get<double>();
    g.similarity.temperature = s.at("temperature").get<double>();
    g.similarity.mode = s.at("mode").get<std::string>() == "literal_exponential"
                            ? graph::SimilarityMode::literal_exponential
                            : graph::SimilarityMode::negative_exponential;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("graphs.json is missing fields: " + std::string(e.what()));
  }
  g.od.trips = graph::read_matrix_csv(dir / "od_trips.csv");
  g.od.flow = graph::read_matrix_csv(dir / "od_flow.csv");
  g.physical_norm = graph::read_matrix_csv(dir / "physical_norm.csv");
  g.similarity_norm = graph::read_matrix_csv(dir / "similarity_norm.csv");
  auto check = [&](const Matrix& m, const std::string& what) {
    if (m.rows != g.n || m.cols != g.n)
      throw DataError(what + " is not " + std::to_string(g.n) + "x" + std::to_string(g.n));
  };
  for (const auto& h : g.hops) check(h.matrix, "adjacency_hop" + std::to_string(h.k));
  for (const auto& d : g.degrees) check(d.matrix, "degree_hop" + std::to_string(d.k));
  check(g.similarity.matrix, "similarity");
  check(g.od.flow, "od_flow");
  check(g.physical_norm, "physical_norm");
  check(g.similarity_norm, "similarity_norm");
  out.hash = hex64(g.content_hash());
  return out;
}

GraphFiles load_or_build_graphs(const RunConfig& cfg, const PreparedData& data, std::size_t k_max, std::ostream* log) {
  const fs::path dir = cfg.graphs_dir();
  if (graphs_exist(dir)) {
    auto files = read_graphs(dir);
    if (files.inputs_hash == graph_inputs_hash(cfg) && files.graphs.n == data.raw.n && files.graphs.k_max() >= k_max) {
      if (log) *log << "using graphs in " << dir.string() << " (hash " << files.hash << ")\n";
      return files;
    }
    if (log) *log << "graphs in " << dir.string() << " do not match this configuration; rebuilding\n";
  }
  GraphFiles files;
  files.graphs = build_graphs(cfg, data, k_max);
  files.hash = hex64(files.graphs.content_hash());
  files.inputs_hash = graph_inputs_hash(cfg);
  write_graphs(dir, files.graphs, cfg, data);
  if (log) *log << "built graphs into " << dir.string() << " (hash " << files.hash << ")\n";
  return files;
}

TrainedModel train_model(const RunConfig& cfg, const PreparedData& data, const graph::GraphSet& graphs,
                         const train::EpochCallback& on_epoch) {
  Rng rng = Rng(cfg.seed).fork(0);
  TrainedModel m{nn::ModelParams::init(cfg.model, rng), {}};
  train::TrainConfig tc = cfg.train;
  tc.seed = cfg.seed;
  m.result =
      train::train(cfg.model, tc, nn::ModelGraphs::from_graph_set(graphs, cfg.model), m.params, data.train, on_epoch);
  return m;
}

std::string checkpoint_info_to_json(const CheckpointInfo& info) {
  Json j;
  j["config_hash"] = info.config_hash;
  j["graph_hash"] = info.graph_hash;
  j["ablation"] = info.ablation;
  j["best_epoch"] = info.best_epoch;
  j["best_val_mae"] = info.best_val_mae;
  j["parameter_count"] = info.parameter_count;
  return j.dump(2) + "\n";
}

CheckpointInfo checkpoint_info_from_json(std::string_view text) {
  try {
    const Json j = Json::parse(text);
    CheckpointInfo info;
    info.config_hash = j.at("config_hash").get<std::string>();
    info.graph_hash = j.at("graph_hash").get<std::string>();
    info.ablation = j.at("ablation").get<std::string>();
    info.best_epoch = j.at("best_epoch").get<std::size_t>();
    info.best_val_mae = j.at("best_val_mae").get<double>();
    info.parameter_count = j.at("parameter_count").get<std::size_t>();
    return info;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("checkpoint sidecar is malformed: " + std::string(e.what()));
  }
}

}  // namespace pbgru::cli
