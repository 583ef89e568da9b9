// SPDX-License-Identifier: Apache-2.0
#include "pbgru/train/training.hpp"

#include <json.hpp>

#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "pbgru/numerics/adam.hpp"
#include "pbgru/numerics/errors.hpp"
#include "pbgru/numerics/io_util.hpp"
#include "pbgru/numerics/ops.hpp"

namespace pbgru::train {

void TrainConfig::validate() const {
  if (epochs == 0) throw ConfigError("epochs must be positive");
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
  if (!(decay_factor > 0.0 && decay_factor <= 1.0)) throw ConfigError("lr_decay must lie in (0, 1]");
  if (decay_every == 0) throw ConfigError("lr_decay_every must be positive");
}

Tensor l1_loss(const Tensor& pred, const Tensor& target) {
  if (pred.shape() != target.shape()) {
    throw ShapeError("l1_loss: prediction " + shape_str(pred.shape()) + " vs target " + shape_str(target.shape()));
  }
  return mean(abs(sub(pred, target)));
}

double lr_schedule(std::size_t epoch, const TrainConfig& cfg) {
  return cfg.learning_rate * std::pow(cfg.decay_factor, static_cast<double>(epoch / cfg.decay_every));
}

std::string training_log_csv(const std::vector<EpochLog>& log) {
  std::ostringstream out;
  out << "epoch,train_loss,val_mae,lr,seconds\n";
  for (const auto& e : log) {
    out << e.epoch << ',' << format_double(e.train_loss) << ',' << format_double(e.val_mae) << ','
        << format_double(e.lr) << ',' << format_double(e.seconds) << '\n';
  }
  return out.str();
}

std::vector<CheckpointEntry> snapshot(const nn::ModelParams& params) {
  std::vector<CheckpointEntry> out;
  for (const auto& nt : params.named_parameters()) {
    const auto v = nt.tensor.values();
    out.push_back({nt.name, nt.tensor.shape(), std::vector<double>(v.begin(), v.end())});
  }
  return out;
}

void restore(nn::ModelParams& params, const std::vector<CheckpointEntry>& entries) {
  auto named = params.named_parameters();
  load_checkpoint_into(named, entries);
}

namespace {

struct Batch {
  nn::BatchInput input;
  Tensor target;
};

Batch make_batch(const std::vector<data::WindowSample>& windows, std::span<const std::size_t> ids, std::size_t n,
                 std::size_t t_in, std::size_t t_out) {
  std::vector<double> x, y;
  x.reserve(ids.size() * t_in * n * 2);
  y.reserve(ids.size() * t_out * n * 2);
  for (std::size_t id : ids) {
    const auto& w = windows[id];
    if (w.x.size() != t_in * n * 2 || w.y.size() != t_out * n * 2) {
      throw DataError("window " + std::to_string(id) + " does not match t_in/t_out/n");
    }
    x.insert(x.end(), w.x.begin(), w.x.end());
    y.insert(y.end(), w.y.begin(), w.y.end());
  }
  return {nn::make_batch_input(x, ids.size(), n, t_in), nn::make_target(y, ids.size(), n, t_out)};
}

}  // namespace

TrainResult train(const nn::ModelConfig& model_cfg, const TrainConfig& cfg, const nn::ModelGraphs& graphs,
                  nn::ModelParams& params, const TrainData& data, const EpochCallback& on_epoch) {
  cfg.validate();
  model_cfg.validate();
  if (data.train.empty()) throw DataError("no training windows");
  if (graphs.n != data.n) throw DataError("graphs and data disagree on the station count");

  Rng shuffle_rng = Rng(cfg.seed).fork(1);
  Rng dropout_rng = Rng(cfg.seed).fork(2);
  auto tensors = params.tensors();
  AdamState adam = make_adam_state(tensors, cfg.learning_rate);

  std::vector<std::size_t> order(data.train.size());
  TrainResult result;
  result.best_val_mae = std::numeric_limits<double>::infinity();
  std::vector<CheckpointEntry> best;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    adam.learning_rate = lr_schedule(epoch, cfg);
    std::iota(order.begin(), order.end(), std::size_t{0});
    shuffle_rng.shuffle(std::span<std::size_t>(order));

    double loss_sum = 0.0;
    std::size_t batch_index = 0;
    for (std::size_t first = 0; first < order.size(); first += cfg.batch_size, ++batch_index) {
      const std::size_t count = std::min(cfg.batch_size, order.size() - first);
      const auto where = [&] { return "epoch " + std::to_string(epoch + 1) + " batch " + std::to_string(batch_index); };
      double value = 0.0;
      try {
        const Batch batch =
            make_batch(data.train, std::span(order).subspan(first, count), data.n, model_cfg.t_in, model_cfg.t_out);
        const Tensor loss =
            l1_loss(nn::forward(batch.input, graphs, params, model_cfg, nn::Mode::train, &dropout_rng).prediction,
                    batch.target);
        value = loss.item();
        if (!std::isfinite(value)) throw NumericError("non-finite loss");
        for (Tensor& t : tensors) t.zero_grad();
        loss.backward();
        adam_step(tensors, adam);
      } catch (const NumericError& e) {
        throw NumericError(std::string(e.what()) + " at " + where());
      }
      loss_sum += value * static_cast<double>(count);
    }

    EpochLog entry;
    entry.epoch = epoch + 1;
    entry.train_loss = loss_sum / static_cast<double>(order.size());
    entry.lr = adam.learning_rate;
    entry.val_mae =
        data.val.empty()
            ? entry.train_loss
            : evaluate(model_cfg, graphs, params, data.val, data.stats, data.n, 1, cfg.batch_size).mean_mae();
    entry.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (entry.val_mae < result.best_val_mae) {
      result.best_val_mae = entry.val_mae;
      result.best_epoch = entry.epoch;
      best = snapshot(params);
    }
    result.log.push_back(entry);
    if (on_epoch) on_epoch(entry);
  }
  if (!best.empty()) restore(params, best);
  return result;
}

std::vector<PredictionRecord> predict_records(const nn::ModelConfig& model_cfg, const nn::ModelGraphs& graphs,
                                              const nn::ModelParams& params,
                                              const std::vector<data::WindowSample>& windows,
                                              const data::ZScoreStats& stats, std::size_t n, std::size_t batch_size) {
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  const std::size_t t_out = model_cfg.t_out;
  std::vector<PredictionRecord> records;
  records.reserve(windows.size() * t_out * n * 2);
  std::vector<std::size_t> ids(windows.size());
  std::iota(ids.begin(), ids.end(), std::size_t{0});
  for (std::size_t first = 0; first < ids.size(); first += batch_size) {
    const std::size_t count = std::min(batch_size, ids.size() - first);
    const Batch batch = make_batch(windows, std::span(ids).subspan(first, count), n, model_cfg.t_in, t_out);
    const Tensor pred = nn::forward(batch.input, graphs, params, model_cfg, nn::Mode::eval).prediction;
    auto y_pred = nn::unpack_prediction(pred, count, n, t_out);
    data::inverse_zscore_in_place(y_pred, stats);
    for (std::size_t b = 0; b < count; ++b) {
      std::vector<double> y_true = windows[first + b].y;
      data::inverse_zscore_in_place(y_true, stats);
      for (std::size_t t = 0; t < t_out; ++t)
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t c = 0; c < 2; ++c) {
            const std::size_t k = (t * n + i) * 2 + c;
            records.push_back({first + b, t + 1, i, c, y_true[k], y_pred[(b * t_out * n * 2) + k]});
          }
    }
  }
  return records;
}

namespace {

struct Accumulator {
  double abs_sum = 0.0, sq_sum = 0.0, ape_sum = 0.0;
  std::size_t count = 0, mape_count = 0;

  void add(double y, double y_hat) {
    const double e = y_hat - y;
    abs_sum += std::abs(e);
    sq_sum += e * e;
    ++count;
    if (y >= kMapeMinTruth) {
      ape_sum += std::abs(e) / y;
      ++mape_count;
    }
  }

  MetricCell cell(const std::string& label) const {
    MetricCell c;
    c.count = count;
    c.mape_count = mape_count;
    if (count > 0) {
      c.mae = abs_sum / static_cast<double>(count);
      c.rmse = std::sqrt(sq_sum / static_cast<double>(count));
    }
    if (mape_count > 0) c.mape = ape_sum / static_cast<double>(mape_count);
    if (c.rmse < c.mae * (1.0 - 1e-12)) {
      throw NumericError("RMSE below MAE for " + label + " (" + format_double(c.rmse) + " < " + format_double(c.mae) +
                         ")");
    }
    return c;
  }
};

}  // namespace

double EvalReport::mean_mae() const {
  if (horizons.empty()) return 0.0;
  double s = 0.0;
  for (const auto& h : horizons) s += h.combined.mae;
  return s / static_cast<double>(horizons.size());
}

EvalReport metrics_from_records(const std::vector<PredictionRecord>& records, std::size_t t_out, int interval_minutes) {
  if (records.empty()) throw DataError("cannot evaluate an empty prediction set");
  std::vector<Accumulator> in(t_out), out(t_out), both(t_out);
  Accumulator overall;
  std::size_t max_window = 0;
  for (const auto& r : records) {
    if (r.horizon_step < 1 || r.horizon_step > t_out) {
      throw DataError("horizon step " + std::to_string(r.horizon_step) + " outside 1.." + std::to_string(t_out));
    }
    if (r.channel > 1) throw DataError("channel must be 0 or 1");
    if (!std::isfinite(r.y_true) || !std::isfinite(r.y_pred)) throw NumericError("non-finite prediction record");
    const std::size_t h = r.horizon_step - 1;
    (r.channel == 0 ? in : out)[h].add(r.y_true, r.y_pred);
    both[h].add(r.y_true, r.y_pred);
    overall.add(r.y_true, r.y_pred);
    max_window = std::max(max_window, r.window_id);
  }
  EvalReport report;
  report.windows = max_window + 1;
  report.records = records.size();
  for (std::size_t h = 0; h < t_out; ++h) {
    const std::string label = "horizon " + std::to_string(h + 1);
    report.horizons.push_back({h + 1, static_cast<int>(h + 1) * interval_minutes, in[h].cell(label + " inflow"),
                               out[h].cell(label + " outflow"), both[h].cell(label)});
  }
  report.overall = overall.cell("overall");
  return report;
}

EvalReport evaluate(const nn::ModelConfig& model_cfg, const nn::ModelGraphs& graphs, const nn::ModelParams& params,
                    const std::vector<data::WindowSample>& windows, const data::ZScoreStats& stats, std::size_t n,
                    int interval_minutes, std::size_t batch_size) {
  if (windows.empty()) throw DataError("cannot evaluate an empty window set");
  return metrics_from_records(predict_records(model_cfg, graphs, params, windows, stats, n, batch_size),
                              model_cfg.t_out, interval_minutes);
}

namespace {
nlohmann::ordered_json cell_json(const MetricCell& c) {
  return {{"mae", c.mae}, {"mape", c.mape}, {"rmse", c.rmse}, {"count", c.count}, {"mape_count", c.mape_count}};
}
}  // namespace

std::string eval_report_to_json(const EvalReport& report) {
  nlohmann::ordered_json j;
  j["windows"] = report.windows;
  j["records"] = report.records;
  j["mape_min_truth"] = kMapeMinTruth;
  nlohmann::ordered_json horizons = nlohmann::ordered_json::object();
  for (const auto& h : report.horizons) {
    horizons[std::to_string(h.minutes) + "min"] = {{"step", h.step},
                                                   {"inflow", cell_json(h.inflow)},
                                                   {"outflow", cell_json(h.outflow)},
                                                   {"combined", cell_json(h.combined)}};
  }
  j["horizons"] = horizons;
  j["overall"] = cell_json(report.overall);
  j["mean_mae"] = report.mean_mae();
  return j.dump(2) + "\n";
}

std::string predictions_to_csv(const std::vector<PredictionRecord>& records) {
  std::string out = "window_id,horizon_step,station_id,channel,y_true,y_pred\n";
  for (const auto& r : records) {
    out += std::to_string(r.window_id) + ',' + std::to_string(r.horizon_step) + ',' + std::to_string(r.station_id) +
           ',' + (r.channel == 0 ? "in" : "out") + ',' + format_double(r.y_true) + ',' + format_double(r.y_pred) + '\n';
  }
  return out;
}

std::vector<PredictionRecord> parse_predictions_csv(std::string_view text) {
  std::vector<PredictionRecord> out;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line_no == 1) {
      if (line != "window_id,horizon_step,station_id,channel,y_true,y_pred") {
        throw DataError("predictions CSV: unexpected header");
      }
      continue;
    }
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    const std::string where = "predictions CSV line " + std::to_string(line_no);
    if (f.size() != 6) throw DataError(where + ": expected 6 fields");
    PredictionRecord r;
    const auto nonneg = [&](const std::string& s, const char* what) {
      const long long v = parse_int(s, what);
      if (v < 0) throw DataError(where + ": negative " + what);
      return static_cast<std::size_t>(v);
    };
    r.window_id = nonneg(f[0], "window_id");
    r.horizon_step = nonneg(f[1], "horizon_step");
    r.station_id = nonneg(f[2], "station_id");
    if (f[3] == "in") {
      r.channel = 0;
    } else if (f[3] == "out") {
      r.channel = 1;
    } else {
      throw DataError(where + ": channel must be in or out");
    }
    r.y_true = parse_double(f[4], "y_true");
    r.y_pred = parse_double(f[5], "y_pred");
    out.push_back(r);
  }
  return out;
}

}  // namespace pbgru::train
