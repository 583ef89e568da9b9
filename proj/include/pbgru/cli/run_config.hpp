// SPDX-License-Identifier: Apache-2.0
//
// Run configuration: one JSON document covering data paths, graph options,
// model shape, training schedule and the synthetic generator. Unknown keys
// are rejected at every level; missing keys keep their defaults.
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pbgru/data/dataset.hpp"
#include "pbgru/data/synth.hpp"
#include "pbgru/graph/graph_builder.hpp"
#include "pbgru/nn/model.hpp"
#include "pbgru/train/training.hpp"

namespace pbgru::cli {

struct DataConfig {
  std::string ridership;  // empty: generate from `synth`
  std::string edges;
  std::string trips;
  data::LoadOptions load;
  std::size_t train_days = 0;  // all three 0: 70/10/20 calendar split
  std::size_t val_days = 0;
  std::size_t test_days = 0;
};

struct GraphConfig {
  std::size_t k_max = 0;  // 0: fdgcn.k_hops
  graph::SimilarityOptions similarity;
  double od_prune_threshold = 0.01;
  data::SeriesChannels series = data::SeriesChannels::both;
};

struct SweepConfig {
  std::size_t k_min = 1;
  std::size_t k_max = 5;
};

struct RunConfig {
  std::uint64_t seed = 0;
  std::string out = "out";
  DataConfig data;
  GraphConfig graph;
  nn::ModelConfig model;
  train::TrainConfig train;
  data::SynthOptions synth;
  bool synth_seed_set = false;  // otherwise the generator follows `seed`
  SweepConfig sweep;
  std::vector<nn::Ablation> ablations{std::begin(nn::kAllAblations), std::end(nn::kAllAblations)};

  /// Throws ConfigError.
  void validate() const;
  std::size_t graph_k_max() const { return graph.k_max ? graph.k_max : model.k_hops; }
  std::filesystem::path out_dir() const { return out; }
  std::filesystem::path graphs_dir() const { return std::filesystem::path(out) / "graphs"; }
  data::SynthOptions effective_synth() const;
};

/// Throws ConfigError naming the offending key.
RunConfig parse_run_config(std::string_view json_text);
RunConfig load_run_config(const std::filesystem::path& path);

/// Every field, defaults included, in a fixed key order.
std::string run_config_to_json(const RunConfig& cfg);

/// FNV-1a over the effective config without the output path.
std::string config_hash(const RunConfig& cfg);

/// Hash of everything the graphs depend on: data source, split, graph
/// options and the generator settings. The hop limit is excluded.
std::string graph_inputs_hash(const RunConfig& cfg);

}  // namespace pbgru::cli
