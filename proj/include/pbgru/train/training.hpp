// SPDX-License-Identifier: Apache-2.0
//
// Mini-batch training with L1 loss, Adam and step-decay learning rate, plus
// evaluation in raw passenger units.
#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "pbgru/data/dataset.hpp"
#include "pbgru/nn/model.hpp"
#include "pbgru/numerics/checkpoint.hpp"

namespace pbgru::train {

struct TrainConfig {
  std::size_t epochs = 350;
  std::size_t batch_size = 48;
  double learning_rate = 1e-3;
  double decay_factor = 0.5;
  std::size_t decay_every = 40;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Mean absolute error over all elements.
Tensor l1_loss(const Tensor& pred, const Tensor& target);

/// learning_rate * decay_factor ^ floor(epoch / decay_every), epoch counted from 0.
double lr_schedule(std::size_t epoch, const TrainConfig& cfg);

struct EpochLog {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_mae = 0.0;
  double lr = 0.0;
  double seconds = 0.0;
};

/// CSV `epoch,train_loss,val_mae,lr,seconds`.
std::string training_log_csv(const std::vector<EpochLog>& log);

/// Windows are already Z-scored with `stats`.
struct TrainData {
  std::size_t n = 0;
  std::vector<data::WindowSample> train;
  std::vector<data::WindowSample> val;
  data::ZScoreStats stats;
};

struct TrainResult {
  std::vector<EpochLog> log;
  std::size_t best_epoch = 0;
  double best_val_mae = 0.0;
};

using EpochCallback = std::function<void(const EpochLog&)>;

/// Trains `params` in place and leaves them at the best-validation epoch (the
/// lowest training loss when there are no validation windows). Throws
/// NumericError naming the epoch and batch on a non-finite loss or gradient.
TrainResult train(const nn::ModelConfig& model_cfg, const TrainConfig& cfg, const nn::ModelGraphs& graphs,
                  nn::ModelParams& params, const TrainData& data, const EpochCallback& on_epoch = {});

struct PredictionRecord {
  std::size_t window_id = 0;
  std::size_t horizon_step = 0;  // 1-based
  std::size_t station_id = 0;
  std::size_t channel = 0;  // 0 inflow, 1 outflow
  double y_true = 0.0;
  double y_pred = 0.0;
};

/// Eval-mode predictions for Z-scored windows, mapped back to passengers.
std::vector<PredictionRecord> predict_records(const nn::ModelConfig& model_cfg, const nn::ModelGraphs& graphs,
                                              const nn::ModelParams& params,
                                              const std::vector<data::WindowSample>& windows,
                                              const data::ZScoreStats& stats, std::size_t n,
                                              std::size_t batch_size = 48);

/// Records whose ground truth is below this are left out of MAPE.
inline constexpr double kMapeMinTruth = 1.0;

struct MetricCell {
  double mae = 0.0;
  double mape = 0.0;  // fraction, not percent; 0 when nothing qualifies
  double rmse = 0.0;
  std::size_t count = 0;
  std::size_t mape_count = 0;
};

struct HorizonMetrics {
  std::size_t step = 0;
  int minutes = 0;
  MetricCell inflow, outflow, combined;
};

struct EvalReport {
  std::vector<HorizonMetrics> horizons;
  MetricCell overall;
  std::size_t windows = 0;
  std::size_t records = 0;

  /// Combined MAE averaged over horizons.
  double mean_mae() const;
};

/// Throws DataError on empty input and NumericError if any cell breaks RMSE >= MAE.
EvalReport metrics_from_records(const std::vector<PredictionRecord>& records, std::size_t t_out, int interval_minutes);

EvalReport evaluate(const nn::ModelConfig& model_cfg, const nn::ModelGraphs& graphs, const nn::ModelParams& params,
                    const std::vector<data::WindowSample>& windows, const data::ZScoreStats& stats, std::size_t n,
                    int interval_minutes, std::size_t batch_size = 48);

std::string eval_report_to_json(const EvalReport& report);

/// CSV `window_id,horizon_step,station_id,channel,y_true,y_pred`, channel "in" or "out".
std::string predictions_to_csv(const std::vector<PredictionRecord>& records);
std::vector<PredictionRecord> parse_predictions_csv(std::string_view text);

/// Parameter values by name, in checkpoint order.
std::vector<CheckpointEntry> snapshot(const nn::ModelParams& params);
void restore(nn::ModelParams& params, const std::vector<CheckpointEntry>& entries);

}  // namespace pbgru::train
