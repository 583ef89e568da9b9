// SPDX-License-Identifier: Apache-2.0
//
// Shared steps behind the subcommands: loading or generating data, the
// chronological split, graph files and their provenance, and checkpoint
// sidecars.
#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "pbgru/cli/run_config.hpp"

namespace pbgru::cli {

struct PreparedData {
  data::RidershipDataset raw;
  graph::StationGraph network;
  std::vector<graph::Trip> trips;  // training period only
  data::Split split;               // raw volumes
  data::ZScoreStats stats;         // fitted on split.train
  train::TrainData train;          // Z-scored windows
  std::vector<data::WindowSample> test;
};

struct SplitDays {
  std::size_t train = 0, val = 0, test = 0;
};
/// Explicit days from the config, otherwise 70/10/20 with at least one
/// validation and one test day.
SplitDays resolve_split(const DataConfig& cfg, std::size_t total_days);

PreparedData prepare_data(const RunConfig& cfg);

/// Throws DataError unless `stats` equal the statistics of `split.train`,
/// which catches stats fitted on validation or test days.
void check_stats_fit_on_train(const data::ZScoreStats& stats, const data::Split& split);

/// Built from the training split only.
graph::GraphSet build_graphs(const RunConfig& cfg, const PreparedData& data, std::size_t k_max);

struct GraphFiles {
  graph::GraphSet graphs;
  std::string hash;         // hex content hash
  std::string inputs_hash;  // graph_inputs_hash of the config that built them
};

/// Writes every matrix as CSV plus graphs.json; returns the file names written.
std::vector<std::string> write_graphs(const std::filesystem::path& dir, const graph::GraphSet& graphs,
                                      const RunConfig& cfg, const PreparedData& data);
GraphFiles read_graphs(const std::filesystem::path& dir);
bool graphs_exist(const std::filesystem::path& dir);
/// A^(k) supports are pairwise disjoint and exclude the diagonal.
bool hop_supports_disjoint(const graph::GraphSet& graphs);

/// Loads graphs from the run's graph directory when they were built from the
/// same inputs and reach at least `k_max` hops; otherwise builds and writes them.
GraphFiles load_or_build_graphs(const RunConfig& cfg, const PreparedData& data, std::size_t k_max,
                                std::ostream* log = nullptr);

struct TrainedModel {
  nn::ModelParams params;
  train::TrainResult result;
};

TrainedModel train_model(const RunConfig& cfg, const PreparedData& data, const graph::GraphSet& graphs,
                         const train::EpochCallback& on_epoch = {});

/// JSON sidecar stored next to a checkpoint.
struct CheckpointInfo {
  std::string config_hash;
  std::string graph_hash;
  std::string ablation;
  std::size_t best_epoch = 0;
  double best_val_mae = 0.0;
  std::size_t parameter_count = 0;
};
std::string checkpoint_info_to_json(const CheckpointInfo& info);
CheckpointInfo checkpoint_info_from_json(std::string_view text);

}  // namespace pbgru::cli
