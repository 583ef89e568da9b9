// SPDX-License-Identifier: Apache-2.0
#include "pbgru/cli/commands.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>

#include "pbgru/cli/pipeline.hpp"
#include "pbgru/numerics/checkpoint.hpp"
#include "pbgru/numerics/errors.hpp"
#include "pbgru/numerics/io_util.hpp"
#include "pbgru/numerics/ops.hpp"
#include "pbgru/train/gradcheck_suite.hpp"

namespace pbgru::cli {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

namespace {

struct GlobalFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string fault;
};

struct SweepFlags {
  std::optional<std::size_t> k_min, k_max;
};

RunConfig resolve_config(const GlobalFlags& flags, const fs::path& fallback = {}) {
  RunConfig cfg;
  if (!flags.config.empty()) {
    cfg = load_run_config(flags.config);
  } else if (!fallback.empty() && fs::exists(fallback)) {
    cfg = load_run_config(fallback);
  }
  if (flags.seed) cfg.seed = *flags.seed;
  if (!flags.out.empty()) cfg.out = flags.out;
  cfg.validate();
  return cfg;
}

fs::path fallback_config(const GlobalFlags& flags) {
  return fs::path(flags.out.empty() ? RunConfig{}.out : flags.out) / "config.json";
}

std::string fixed(double v, int digits = 4) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(digits) << v;
  return s.str();
}

std::string with_provenance(const std::string& json_text, const std::string& cfg_hash, const std::string& graph_hash,
                            const std::string& split) {
  Json j = Json::parse(json_text);
  Json out;
  out["config_hash"] = cfg_hash;
  out["graph_hash"] = graph_hash;
  out["split"] = split;
  for (auto it = j.begin(); it != j.end(); ++it) out[it.key()] = it.value();
  return out.dump(2) + "\n";
}

std::string horizon_label(const train::HorizonMetrics& h) { return std::to_string(h.minutes) + "min"; }

// One trained model with its artifacts in `dir`.
struct RunOutcome {
  CheckpointInfo info;
  std::optional<train::EvalReport> val;
  train::EvalReport test;
};

RunOutcome train_and_report(const RunConfig& cfg, const PreparedData& data, const GraphFiles& graphs,
                            const fs::path& dir, std::ostream& out, bool verbose) {
  const std::size_t epochs = cfg.train.epochs;
  const auto on_epoch = [&](const train::EpochLog& e) {
    if (!verbose) return;
    out << "epoch " << e.epoch << "/" << epochs << "  loss " << fixed(e.train_loss, 5) << "  val_mae "
        << fixed(e.val_mae, 3) << "  lr " << format_double(e.lr) << "\n";
  };
  TrainedModel model = train_model(cfg, data, graphs.graphs, on_epoch);
  const std::string cfg_hash = config_hash(cfg);

  RunOutcome r;
  r.info = {cfg_hash,
            graphs.hash,
            nn::to_string(cfg.model.ablation),
            model.result.best_epoch,
            model.result.best_val_mae,
            nn::parameter_count(model.params.named_parameters())};
  write_text_file(dir / "config.json", run_config_to_json(cfg));
  write_text_file(dir / "stats.json", data::zscore_to_json(data.stats));
  write_checkpoint(dir / "checkpoint.bin", model.params.named_parameters());
  write_text_file(dir / "checkpoint.json", checkpoint_info_to_json(r.info));
  write_text_file(dir / "train_log.csv", train::training_log_csv(model.result.log));

  const nn::ModelGraphs mg = nn::ModelGraphs::from_graph_set(graphs.graphs, cfg.model);
  const int interval = data.raw.interval_minutes;
  if (!data.train.val.empty()) {
    r.val = train::evaluate(cfg.model, mg, model.params, data.train.val, data.stats, data.raw.n, interval);
    write_text_file(dir / "val_report.json",
                    with_provenance(train::eval_report_to_json(*r.val), cfg_hash, graphs.hash, "val"));
  }
  r.test = train::evaluate(cfg.model, mg, model.params, data.test, data.stats, data.raw.n, interval);
  write_text_file(dir / "eval_report.json",
                  with_provenance(train::eval_report_to_json(r.test), cfg_hash, graphs.hash, "test"));
  return r;
}

double selection_mae(const RunOutcome& r) { return r.val ? r.val->mean_mae() : r.test.mean_mae(); }

int cmd_synth(const GlobalFlags& flags, std::ostream& out) {
  const RunConfig cfg = resolve_config(flags);
  const auto metro = data::synth_metro(cfg.effective_synth());
  const auto days = resolve_split(cfg.data, metro.dataset.num_days());
  const fs::path dir = cfg.out_dir();
  data::save_ridership_csv(dir / "ridership.csv", metro.dataset);
  write_text_file(dir / "edges.csv", data::edges_to_csv(metro.graph));
  write_text_file(dir / "trips.csv", data::trips_to_csv(data::aggregate_trips(metro, 0, days.train)));
  std::string roles = "station_id,role,scale\n";
  for (std::size_t i = 0; i < metro.roles.size(); ++i) {
    roles +=
        std::to_string(i) + ',' + data::to_string(metro.roles[i]) + ',' + format_double(metro.station_scale[i]) + '\n';
  }
  write_text_file(dir / "roles.csv", roles);
  write_text_file(dir / "config.json", run_config_to_json(cfg));
  out << "wrote " << metro.dataset.n << " stations x " << metro.dataset.num_days() << " days to " << dir.string()
      << " (trips cover the first " << days.train << " training days)\n";
  return kExitOk;
}

int cmd_build_graphs(const GlobalFlags& flags, std::ostream& out) {
  const RunConfig cfg = resolve_config(flags);
  const PreparedData data = prepare_data(cfg);
  const auto graphs = build_graphs(cfg, data, cfg.graph_k_max());
  const auto files = write_graphs(cfg.graphs_dir(), graphs, cfg, data);
  const bool disjoint = hop_supports_disjoint(graphs);
  out << "wrote " << files.size() << " files to " << cfg.graphs_dir().string() << " (K=" << graphs.k_max() << ", hash "
      << hex64(graphs.content_hash()) << ")\n";
  out << "hop supports disjoint: " << (disjoint ? "yes" : "no") << "\n";
  return disjoint ? kExitOk : kExitCheckFailed;
}

int cmd_train(const GlobalFlags& flags, std::ostream& out) {
  const RunConfig cfg = resolve_config(flags);
  const PreparedData data = prepare_data(cfg);
  const GraphFiles graphs = load_or_build_graphs(cfg, data, std::max(cfg.graph_k_max(), cfg.model.k_hops), &out);
  out << "training " << nn::to_string(cfg.model.ablation) << " on " << data.train.train.size() << " windows ("
      << data.train.val.size() << " validation)\n";
  const RunOutcome r = train_and_report(cfg, data, graphs, cfg.out_dir(), out, true);
  out << "best epoch " << r.info.best_epoch << " (validation MAE " << fixed(r.info.best_val_mae) << "), test MAE "
      << fixed(r.test.mean_mae()) << "\n";
  out << "artifacts in " << cfg.out_dir().string() << "\n";
  return kExitOk;
}

struct LoadedRun {
  RunConfig cfg;
  PreparedData data;
  GraphFiles graphs;
  nn::ModelParams params;
  CheckpointInfo info;
};

LoadedRun load_trained_run(const GlobalFlags& flags) {
  LoadedRun run;
  run.cfg = resolve_config(flags, fallback_config(flags));
  const fs::path dir = run.cfg.out_dir();
  if (!fs::exists(dir / "checkpoint.json")) {
    throw DataError("no checkpoint in " + dir.string() + "; run train first");
  }
  run.info = checkpoint_info_from_json(read_text_file(dir / "checkpoint.json"));
  const std::string cfg_hash = config_hash(run.cfg);
  if (run.info.config_hash != cfg_hash) {
    throw ConfigError("config hash " + cfg_hash + " does not match the checkpoint's " + run.info.config_hash +
                      "; evaluate with the config used for training");
  }
  run.graphs = read_graphs(run.cfg.graphs_dir());
  if (run.graphs.hash != run.info.graph_hash) {
    throw ConfigError("graph hash " + run.graphs.hash + " in " + run.cfg.graphs_dir().string() +
                      " does not match the checkpoint's " + run.info.graph_hash + "; refusing to evaluate");
  }
  run.data = prepare_data(run.cfg);
  check_stats_fit_on_train(data::zscore_from_json(read_text_file(dir / "stats.json")), run.data.split);
  Rng rng(0);
  run.params = nn::ModelParams::init(run.cfg.model, rng);
  train::restore(run.params, read_checkpoint(dir / "checkpoint.bin"));
  return run;
}

int cmd_evaluate(const GlobalFlags& flags, std::ostream& out, bool plot) {
  const LoadedRun run = load_trained_run(flags);
  const fs::path dir = run.cfg.out_dir();
  const nn::ModelGraphs mg = nn::ModelGraphs::from_graph_set(run.graphs.graphs, run.cfg.model);
  const auto records =
      train::predict_records(run.cfg.model, mg, run.params, run.data.test, run.data.stats, run.data.raw.n);
  write_text_file(dir / "predictions.csv", train::predictions_to_csv(records));
  if (!plot) {
    const auto report = train::metrics_from_records(records, run.cfg.model.t_out, run.data.raw.interval_minutes);
    write_text_file(dir / "eval_report.json",
                    with_provenance(train::eval_report_to_json(report), run.info.config_hash, run.graphs.hash, "test"));
    out << "horizon  in_MAE  out_MAE  MAE  RMSE  MAPE\n";
    for (const auto& h : report.horizons) {
      out << horizon_label(h) << "  " << fixed(h.inflow.mae, 3) << "  " << fixed(h.outflow.mae, 3) << "  "
          << fixed(h.combined.mae, 3) << "  " << fixed(h.combined.rmse, 3) << "  " << fixed(h.combined.mape, 4) << "\n";
    }
    out << "wrote eval_report.json and predictions.csv to " << dir.string() << "\n";
    return kExitOk;
  }
  const auto& test = run.data.split.test;
  std::string csv = "timestamp,station_id,channel,horizon_step,y_true,y_pred\n";
  for (const auto& r : records) {
    const auto& w = run.data.test[r.window_id];
    const int step = static_cast<int>(w.start + run.cfg.model.t_in + r.horizon_step - 1);
    csv += data::format_timestamp(test.day_labels[w.day], test.day_start_minute + step * test.interval_minutes) + ',' +
           std::to_string(r.station_id) + ',' + (r.channel == 0 ? "in" : "out") + ',' + std::to_string(r.horizon_step) +
           ',' + format_double(r.y_true) + ',' + format_double(r.y_pred) + '\n';
  }
  write_text_file(dir / "plot_series.csv", csv);
  out << "wrote " << records.size() << " predictions to " << (dir / "predictions.csv").string() << " and "
      << (dir / "plot_series.csv").string() << "\n";
  return kExitOk;
}

int cmd_sweep_k(const GlobalFlags& flags, const SweepFlags& sweep, std::ostream& out) {
  RunConfig cfg = resolve_config(flags);
  if (sweep.k_min) cfg.sweep.k_min = *sweep.k_min;
  if (sweep.k_max) cfg.sweep.k_max = *sweep.k_max;
  if (cfg.sweep.k_min < 1 || cfg.sweep.k_min > cfg.sweep.k_max) {
    throw ConfigError("sweep range must satisfy 1 <= k_min <= k_max, got " + std::to_string(cfg.sweep.k_min) + ".." +
                      std::to_string(cfg.sweep.k_max));
  }
  if (!cfg.model.uses_fdgcn()) throw ConfigError("sweep-k needs an ablation with the FDGCN branch (d-base or full)");
  const PreparedData data = prepare_data(cfg);
  const GraphFiles graphs = load_or_build_graphs(cfg, data, cfg.sweep.k_max, &out);

  std::string csv = "K,horizon,MAE,RMSE\n";
  Json runs = Json::array();
  std::size_t best_k = 0;
  double best_mae = 0.0;
  for (std::size_t k = cfg.sweep.k_min; k <= cfg.sweep.k_max; ++k) {
    RunConfig run_cfg = cfg;
    run_cfg.model.k_hops = k;
    const RunOutcome r =
        train_and_report(run_cfg, data, graphs, cfg.out_dir() / "sweep" / ("K" + std::to_string(k)), out, false);
    for (const auto& h : r.test.horizons) {
      csv += std::to_string(k) + ',' + horizon_label(h) + ',' + format_double(h.combined.mae) + ',' +
             format_double(h.combined.rmse) + '\n';
    }
    const double sel = selection_mae(r);
    if (best_k == 0 || sel < best_mae) {
      best_k = k;
      best_mae = sel;
    }
    runs.push_back({{"K", k},
                    {"val_mae", sel},
                    {"test_mae", r.test.mean_mae()},
                    {"best_epoch", r.info.best_epoch},
                    {"parameters", r.info.parameter_count}});
    out << "K=" << k << "  val MAE " << fixed(sel) << "  test MAE " << fixed(r.test.mean_mae()) << "\n";
  }
  Json summary;
  summary["config_hash"] = config_hash(cfg);
  summary["graph_hash"] = graphs.hash;
  summary["selection"] = "lowest validation MAE averaged over horizons";
  summary["best_k"] = best_k;
  summary["runs"] = runs;
  write_text_file(cfg.out_dir() / "sweep_k.csv", csv);
  write_text_file(cfg.out_dir() / "sweep_k.json", summary.dump(2) + "\n");
  write_text_file(cfg.out_dir() / "config.json", run_config_to_json(cfg));
  out << "best K = " << best_k << "\n";
  return kExitOk;
}

int cmd_ablate(const GlobalFlags& flags, std::ostream& out) {
  const RunConfig cfg = resolve_config(flags);
  const PreparedData data = prepare_data(cfg);
  const GraphFiles graphs = load_or_build_graphs(cfg, data, std::max(cfg.graph_k_max(), cfg.model.k_hops), &out);

  std::string csv = "variant,horizon,MAE,MAPE,RMSE\n";
  Json rows = Json::array();
  for (const nn::Ablation a : cfg.ablations) {
    RunConfig run_cfg = cfg;
    run_cfg.model.ablation = a;
    const RunOutcome r =
        train_and_report(run_cfg, data, graphs, cfg.out_dir() / "ablate" / nn::to_string(a), out, false);
    for (const auto& h : r.test.horizons) {
      csv += std::string(nn::to_string(a)) + ',' + horizon_label(h) + ',' + format_double(h.combined.mae) + ',' +
             format_double(h.combined.mape) + ',' + format_double(h.combined.rmse) + '\n';
    }
    rows.push_back({{"variant", nn::to_string(a)},
                    {"val_mae", selection_mae(r)},
                    {"test_mae", r.test.mean_mae()},
                    {"best_epoch", r.info.best_epoch},
                    {"parameters", r.info.parameter_count}});
    out << nn::to_string(a) << "  val MAE " << fixed(selection_mae(r)) << "  test MAE " << fixed(r.test.mean_mae())
        << "  params " << r.info.parameter_count << "\n";
  }
  Json summary;
  summary["config_hash"] = config_hash(cfg);
  summary["graph_hash"] = graphs.hash;
  summary["variants"] = rows;
  write_text_file(cfg.out_dir() / "ablation.csv", csv);
  write_text_file(cfg.out_dir() / "ablation.json", summary.dump(2) + "\n");
  write_text_file(cfg.out_dir() / "config.json", run_config_to_json(cfg));
  return kExitOk;
}

int cmd_gradcheck(const GlobalFlags& flags, double tolerance, std::ostream& out) {
  const RunConfig cfg = resolve_config(flags);
  const auto report = train::run_gradcheck_suite(cfg.seed, tolerance);
  out << train::suite_report_to_text(report);
  if (!flags.out.empty()) write_text_file(fs::path(flags.out) / "gradcheck.json", train::suite_report_to_json(report));
  return report.passed() ? kExitOk : kExitCheckFailed;
}

class FaultGuard {
 public:
  explicit FaultGuard(const std::string& name) {
    if (name.empty()) return;
    if (name != "tanh-grad-sign") throw ConfigError("unknown fault '" + name + "'; known: tanh-grad-sign");
    fault::set_tanh_grad_sign_flip(true);
    active_ = true;
  }
  ~FaultGuard() {
    if (active_) fault::set_tanh_grad_sign_flip(false);
  }
  FaultGuard(const FaultGuard&) = delete;
  FaultGuard& operator=(const FaultGuard&) = delete;

 private:
  bool active_ = false;
};

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Metro inflow/outflow forecasting with physical and virtual station graphs"};
  app.name("pbgru");
  app.require_subcommand(1);
  app.fallthrough();

  GlobalFlags flags;
  SweepFlags sweep;
  double tolerance = 1e-4;
  app.add_option("--config", flags.config, "JSON run configuration");
  app.add_option("--seed", flags.seed, "Run seed (overrides the config)");
  app.add_option("--out", flags.out, "Output directory (overrides the config)");
  app.add_option("--inject-fault", flags.fault)->group("");

  auto* synth = app.add_subcommand("synth", "Generate a synthetic metro dataset as CSV files");
  auto* build = app.add_subcommand("build-graphs", "Build the station graphs from the training split");
  auto* train = app.add_subcommand("train", "Train a model and write checkpoint, log and reports");
  auto* evaluate = app.add_subcommand("evaluate", "Score a trained model on the test split");
  auto* predict = app.add_subcommand("predict", "Export test predictions and per-station plot series");
  auto* sweep_k = app.add_subcommand("sweep-k", "Train one model per hop limit K");
  sweep_k->add_option("--k-min", sweep.k_min, "Smallest K");
  sweep_k->add_option("--k-max", sweep.k_max, "Largest K");
  auto* ablate = app.add_subcommand("ablate", "Train every ablation variant");
  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of every gradient");
  gradcheck->add_option("--tolerance", tolerance, "Maximum relative error");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    const FaultGuard guard(flags.fault);
    if (synth->parsed()) return cmd_synth(flags, out);
    if (build->parsed()) return cmd_build_graphs(flags, out);
    if (train->parsed()) return cmd_train(flags, out);
    if (evaluate->parsed()) return cmd_evaluate(flags, out, false);
    if (predict->parsed()) return cmd_evaluate(flags, out, true);
    if (sweep_k->parsed()) return cmd_sweep_k(flags, sweep, out);
    if (ablate->parsed()) return cmd_ablate(flags, out);
    if (gradcheck->parsed()) return cmd_gradcheck(flags, tolerance, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const ShapeError& e) {
    err << "shape error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const fs::filesystem_error& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitInternal;
  }
  return kExitInternal;
}

}  // namespace pbgru::cli
