// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <json.hpp>

#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include "pbgru/cli/commands.hpp"
#include "pbgru/cli/pipeline.hpp"
#include "pbgru/graph/matrix_io.hpp"
#include "pbgru/numerics/errors.hpp"
#include "pbgru/numerics/io_util.hpp"

namespace pbgru::cli {
namespace {

namespace fs = std::filesystem;
using Json = nlohmann::json;

struct CliResult {
  int code = 0;
  std::string out, err;
};

CliResult run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "pbgru");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("pbgru_cli_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

const char* kSmallConfig = R"({
  "seed": 3,
  "graph": {"top_k": 2},
  "model": {"hidden": 6},
  "fdgcn": {"k_hops": 2},
  "train": {"epochs": 2, "batch_size": 32},
  "synth": {"stations": 6, "days": 10, "steps_per_day": 24}
})";

fs::path write_config(const fs::path& dir, const std::string& text = kSmallConfig) {
  const fs::path p = dir / "config_in.json";
  write_text_file(p, text);
  return p;
}

std::size_t count_files_with_prefix(const fs::path& dir, const std::string& prefix) {
  std::size_t n = 0;
  for (const auto& e : fs::directory_iterator(dir)) n += e.path().filename().string().rfind(prefix, 0) == 0;
  return n;
}

std::size_t line_count(const fs::path& p) {
  const std::string text = read_text_file(p);
  return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n'));
}

TEST(RunConfig, DefaultsEchoTrainingProtocol) {
  const Json j = Json::parse(run_config_to_json(RunConfig{}));
  EXPECT_EQ(j["train"]["batch_size"], 48);
  EXPECT_EQ(j["train"]["epochs"], 350);
  EXPECT_EQ(j["train"]["learning_rate"], 1e-3);
  EXPECT_EQ(j["model"]["hidden"], 650);
  EXPECT_EQ(j["model"]["dropout_heavy"], 0.4);
  EXPECT_EQ(j["model"]["dropout_light"], 0.1);
  EXPECT_EQ(j["model"]["ablation"], "full");
}

TEST(RunConfig, RoundTripsThroughJson) {
  const RunConfig cfg = parse_run_config(kSmallConfig);
  const std::string text = run_config_to_json(cfg);
  EXPECT_EQ(run_config_to_json(parse_run_config(text)), text);
  EXPECT_EQ(cfg.model.hidden, 6u);
  EXPECT_EQ(cfg.synth.n, 6u);
  EXPECT_EQ(cfg.effective_synth().seed, 3u);
}

TEST(RunConfig, RejectsUnknownKeysAtEveryLevel) {
  for (const char* text : {R"({"sed": 1})", R"({"model": {"hiden": 3}})", R"({"train": {"epochs": 2, "x": 1}})",
                           R"({"synth": {"stations": 8, "colour": "red"}})"}) {
    EXPECT_THROW(parse_run_config(text), ConfigError) << text;
  }
}

TEST(RunConfig, RejectsWrongTypesAndBadValues) {
  EXPECT_THROW(parse_run_config(R"({"model": {"hidden": "big"}})"), ConfigError);
  EXPECT_THROW(parse_run_config(R"({"model": {"ablation": "half"}})"), ConfigError);
  EXPECT_THROW(parse_run_config(R"({"train": {"batch_size": 0}})"), ConfigError);
  EXPECT_THROW(parse_run_config("not json"), ConfigError);
}

TEST(RunConfig, HashIgnoresOutputDirectoryOnly) {
  RunConfig a = parse_run_config(kSmallConfig);
  RunConfig b = a;
  b.out = "elsewhere";
  EXPECT_EQ(config_hash(a), config_hash(b));
  b.train.epochs = 3;
  EXPECT_NE(config_hash(a), config_hash(b));
  EXPECT_EQ(graph_inputs_hash(a), graph_inputs_hash(b));
  b.graph.similarity.top_k = 3;
  EXPECT_NE(graph_inputs_hash(a), graph_inputs_hash(b));
}

TEST(Pipeline, DefaultSplitIsChronologicalSeventyTenTwenty) {
  const auto s = resolve_split(DataConfig{}, 20);
  EXPECT_EQ(s.train, 14u);
  EXPECT_EQ(s.val, 2u);
  EXPECT_EQ(s.test, 4u);
  DataConfig explicit_days;
  explicit_days.train_days = 15;
  explicit_days.val_days = 3;
  explicit_days.test_days = 3;
  EXPECT_THROW(resolve_split(explicit_days, 20), DataError);
}

TEST(Pipeline, ZScoreLeakageGuardFlagsStatsFromOtherDays) {
  const RunConfig cfg = parse_run_config(kSmallConfig);
  const PreparedData data = prepare_data(cfg);
  EXPECT_NO_THROW(check_stats_fit_on_train(data.stats, data.split));
  EXPECT_THROW(check_stats_fit_on_train(data::fit_zscore(data.split.test), data.split), DataError);
  EXPECT_THROW(check_stats_fit_on_train(data::fit_zscore(data.raw), data.split), DataError);
}

TEST(Pipeline, GraphsUseTrainingDaysOnly) {
  RunConfig cfg = parse_run_config(kSmallConfig);
  const PreparedData data = prepare_data(cfg);
  const auto graphs = build_graphs(cfg, data, 2);
  EXPECT_EQ(data.stats.fit_last_day, data.split.train.day_labels.back());
  // Perturbing the held-out days leaves the graphs unchanged.
  PreparedData shifted = data;
  for (auto& day : shifted.split.test.days)
    for (double& v : day) v *= 3.0;
  EXPECT_EQ(build_graphs(cfg, shifted, 2).content_hash(), graphs.content_hash());
}

TEST(BuildGraphs, WritesOneFilePerHopAndPassesDisjointness) {
  const fs::path dir = scratch("build");
  const fs::path cfg = write_config(dir);
  const auto r = run_cli({"--config", cfg.string(), "--out", (dir / "o").string(), "build-graphs"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const fs::path g = dir / "o" / "graphs";
  EXPECT_EQ(count_files_with_prefix(g, "adjacency_hop"), 2u);
  EXPECT_EQ(count_files_with_prefix(g, "degree_hop"), 2u);
  for (const char* f : {"similarity.csv", "od_flow.csv", "physical_norm.csv", "similarity_norm.csv", "graphs.json"})
    EXPECT_TRUE(fs::exists(g / f)) << f;
  const Json meta = Json::parse(read_text_file(g / "graphs.json"));
  EXPECT_TRUE(meta["checks"]["hop_supports_disjoint"].get<bool>());
  EXPECT_LE(meta["checks"]["od_flow_max_row_sum"].get<double>(), 1.0 + 1e-9);
  const auto files = read_graphs(g);
  EXPECT_TRUE(hop_supports_disjoint(files.graphs));
  EXPECT_EQ(files.hash, meta["content_hash"].get<std::string>());
}

TEST(BuildGraphs, SingleHopWritesExactlyOneAdjacencyFile) {
  const fs::path dir = scratch("k1");
  const fs::path cfg = write_config(dir);
  const std::string out = (dir / "o").string();
  ASSERT_EQ(run_cli({"--config", cfg.string(), "--out", out, "build-graphs"}).code, kExitOk);
  const fs::path cfg1 = dir / "k1.json";
  write_text_file(cfg1, R"({"seed": 3, "graph": {"top_k": 2, "k_max": 1}, "fdgcn": {"k_hops": 1},
    "synth": {"stations": 6, "days": 10, "steps_per_day": 24}})");
  ASSERT_EQ(run_cli({"--config", cfg1.string(), "--out", out, "build-graphs"}).code, kExitOk);
  EXPECT_EQ(count_files_with_prefix(dir / "o" / "graphs", "adjacency_hop"), 1u);
  EXPECT_EQ(count_files_with_prefix(dir / "o" / "graphs", "degree_hop"), 1u);
}

TEST(BuildGraphs, RerunIsByteIdentical) {
  const fs::path dir = scratch("rerun");
  const fs::path cfg = write_config(dir);
  ASSERT_EQ(run_cli({"--config", cfg.string(), "--out", (dir / "a").string(), "build-graphs"}).code, kExitOk);
  ASSERT_EQ(run_cli({"--config", cfg.string(), "--out", (dir / "b").string(), "build-graphs"}).code, kExitOk);
  std::size_t compared = 0;
  for (const auto& e : fs::directory_iterator(dir / "a" / "graphs")) {
    const fs::path other = dir / "b" / "graphs" / e.path().filename();
    ASSERT_TRUE(fs::exists(other)) << other;
    EXPECT_EQ(read_text_file(e.path()), read_text_file(other)) << e.path().filename();
    ++compared;
  }
  EXPECT_EQ(compared, 2u * 2u + 7u);
}

TEST(BuildGraphs, GraphsFromSynthCsvFilesMatchInMemoryGraphs) {
  const fs::path dir = scratch("files");
  const fs::path cfg = write_config(dir);
  const fs::path data_dir = dir / "data";
  ASSERT_EQ(run_cli({"--config", cfg.string(), "--out", data_dir.string(), "synth"}).code, kExitOk);
  for (const char* f : {"ridership.csv", "edges.csv", "trips.csv", "roles.csv", "config.json"})
    EXPECT_TRUE(fs::exists(data_dir / f)) << f;

  RunConfig from_files = parse_run_config(kSmallConfig);
  from_files.data.ridership = (data_dir / "ridership.csv").string();
  from_files.data.edges = (data_dir / "edges.csv").string();
  from_files.data.trips = (data_dir / "trips.csv").string();
  const RunConfig in_memory = parse_run_config(kSmallConfig);
  const auto a = build_graphs(from_files, prepare_data(from_files), 2);
  const auto b = build_graphs(in_memory, prepare_data(in_memory), 2);
  EXPECT_EQ(a.content_hash(), b.content_hash());
}

TEST(BuildGraphs, MissingInputFileIsADataError) {
  const fs::path dir = scratch("missing");
  const fs::path cfg = write_config(dir, R"({"data": {"ridership": "/nonexistent/ridership.csv",
    "edges": "/nonexistent/edges.csv", "trips": "/nonexistent/trips.csv"}})");
  EXPECT_EQ(run_cli({"--config", cfg.string(), "--out", (dir / "o").string(), "build-graphs"}).code, kExitData);
}

class TrainedRun : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = scratch("trained");
    cfg_ = write_config(dir_);
    out_ = (dir_ / "o").string();
    const auto r = run_cli({"--config", cfg_.string(), "--out", out_, "train"});
    ASSERT_EQ(r.code, kExitOk) << r.err;
  }
  static inline fs::path dir_, cfg_;
  static inline std::string out_;
};

TEST_F(TrainedRun, WritesArtifactsWithProvenance) {
  for (const char* f : {"config.json", "stats.json", "checkpoint.bin", "checkpoint.json", "train_log.csv",
                        "val_report.json", "eval_report.json"})
    EXPECT_TRUE(fs::exists(fs::path(out_) / f)) << f;
  const RunConfig cfg = load_run_config(cfg_);
  const auto info = checkpoint_info_from_json(read_text_file(fs::path(out_) / "checkpoint.json"));
  EXPECT_EQ(info.config_hash, config_hash(cfg));
  EXPECT_EQ(info.graph_hash, read_graphs(fs::path(out_) / "graphs").hash);
  EXPECT_GE(info.best_epoch, 1u);
  EXPECT_EQ(line_count(fs::path(out_) / "train_log.csv"), 3u);
  const RunConfig echoed = load_run_config(fs::path(out_) / "config.json");
  EXPECT_EQ(config_hash(echoed), config_hash(cfg));
}

TEST_F(TrainedRun, EvaluateReportsEveryHorizon) {
  const auto r = run_cli({"--config", cfg_.string(), "--out", out_, "evaluate"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const Json report = Json::parse(read_text_file(fs::path(out_) / "eval_report.json"));
  EXPECT_EQ(report["config_hash"], config_hash(load_run_config(cfg_)));
  EXPECT_EQ(report["split"], "test");
  ASSERT_EQ(report["horizons"].size(), 4u);
  for (const char* h : {"15min", "30min", "45min", "60min"}) {
    ASSERT_TRUE(report["horizons"].contains(h)) << h;
    for (const char* c : {"inflow", "outflow", "combined"}) {
      const auto& cell = report["horizons"][h][c];
      EXPECT_GE(cell["rmse"].get<double>(), cell["mae"].get<double>());
    }
  }
}

TEST_F(TrainedRun, EvaluateFallsBackToEchoedConfig) { EXPECT_EQ(run_cli({"--out", out_, "evaluate"}).code, kExitOk); }

TEST_F(TrainedRun, PredictEmitsOneRowPerWindowStepStationChannel) {
  const auto r = run_cli({"--config", cfg_.string(), "--out", out_, "predict"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const RunConfig cfg = load_run_config(cfg_);
  const PreparedData data = prepare_data(cfg);
  const std::size_t expected = data.test.size() * cfg.model.t_out * data.raw.n * 2;
  EXPECT_GT(data.test.size(), 0u);
  EXPECT_EQ(line_count(fs::path(out_) / "predictions.csv"), expected + 1);
  EXPECT_EQ(line_count(fs::path(out_) / "plot_series.csv"), expected + 1);
  const std::string plot = read_text_file(fs::path(out_) / "plot_series.csv");
  EXPECT_EQ(plot.substr(0, plot.find('\n')), "timestamp,station_id,channel,horizon_step,y_true,y_pred");
}

TEST_F(TrainedRun, EvaluateRefusesAConfigChange) {
  EXPECT_EQ(run_cli({"--config", cfg_.string(), "--out", out_, "--seed", "99", "evaluate"}).code, kExitConfig);
}

TEST(Provenance, EvaluateRefusesWrongGraphHash) {
  const fs::path dir = scratch("graph_hash");
  const fs::path cfg = write_config(dir);
  const std::string out = (dir / "o").string();
  ASSERT_EQ(run_cli({"--config", cfg.string(), "--out", out, "train"}).code, kExitOk);

  const fs::path sidecar = fs::path(out) / "checkpoint.json";
  const std::string original = read_text_file(sidecar);
  CheckpointInfo info = checkpoint_info_from_json(original);
  info.graph_hash = "0000000000000000";
  write_text_file(sidecar, checkpoint_info_to_json(info));
  const auto refused = run_cli({"--config", cfg.string(), "--out", out, "evaluate"});
  EXPECT_EQ(refused.code, kExitConfig);
  EXPECT_NE(refused.err.find("graph hash"), std::string::npos) << refused.err;
  write_text_file(sidecar, original);
  ASSERT_EQ(run_cli({"--config", cfg.string(), "--out", out, "evaluate"}).code, kExitOk);

  const fs::path sim = fs::path(out) / "graphs" / "similarity_norm.csv";
  Matrix m = graph::read_matrix_csv(sim);
  m(0, 0) += 0.5;
  graph::write_matrix_csv(sim, m);
  EXPECT_EQ(run_cli({"--config", cfg.string(), "--out", out, "evaluate"}).code, kExitConfig);
}

TEST(Provenance, EvaluateRefusesStatsFittedOutsideTraining) {
  const fs::path dir = scratch("stats");
  const fs::path cfg = write_config(dir);
  const std::string out = (dir / "o").string();
  ASSERT_EQ(run_cli({"--config", cfg.string(), "--out", out, "train"}).code, kExitOk);
  const PreparedData data = prepare_data(load_run_config(cfg));
  write_text_file(fs::path(out) / "stats.json", data::zscore_to_json(data::fit_zscore(data.raw)));
  const auto r = run_cli({"--config", cfg.string(), "--out", out, "evaluate"});
  EXPECT_EQ(r.code, kExitData);
  EXPECT_NE(r.err.find("Z-score"), std::string::npos) << r.err;
}

TEST(Sweep, OneRowPerKAndHorizon) {
  const fs::path dir = scratch("sweep");
  const fs::path cfg = write_config(dir);
  const auto r =
      run_cli({"--config", cfg.string(), "--out", (dir / "o").string(), "sweep-k", "--k-min", "1", "--k-max", "3"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_EQ(line_count(dir / "o" / "sweep_k.csv"), 1u + 3u * 4u);
  const Json summary = Json::parse(read_text_file(dir / "o" / "sweep_k.json"));
  EXPECT_EQ(summary["runs"].size(), 3u);
  const auto best = summary["best_k"].get<std::size_t>();
  EXPECT_GE(best, 1u);
  EXPECT_LE(best, 3u);
  EXPECT_EQ(count_files_with_prefix(dir / "o" / "graphs", "adjacency_hop"), 3u);
}

TEST(Sweep, RejectsEmptyRange) {
  const fs::path dir = scratch("sweep_empty");
  const fs::path cfg = write_config(dir);
  EXPECT_EQ(
      run_cli({"--config", cfg.string(), "--out", (dir / "o").string(), "sweep-k", "--k-min", "3", "--k-max", "2"})
          .code,
      kExitConfig);
}

TEST(Ablate, FiveVariantsFiveRowsPerHorizon) {
  const fs::path dir = scratch("ablate");
  const fs::path cfg = write_config(dir);
  const auto r = run_cli({"--config", cfg.string(), "--out", (dir / "o").string(), "ablate"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_EQ(line_count(dir / "o" / "ablation.csv"), 1u + 5u * 4u);
  const Json summary = Json::parse(read_text_file(dir / "o" / "ablation.json"));
  ASSERT_EQ(summary["variants"].size(), 5u);
  std::size_t base = 0, full = 0;
  for (const auto& v : summary["variants"]) {
    if (v["variant"] == "base") base = v["parameters"];
    if (v["variant"] == "full") full = v["parameters"];
  }
  EXPECT_GT(full, base);
}

TEST(Gradcheck, PassesAndFailsUnderInjectedFault) {
  const auto ok = run_cli({"gradcheck"});
  EXPECT_EQ(ok.code, kExitOk) << ok.out;
  EXPECT_NE(ok.out.find("PASS"), std::string::npos);
  EXPECT_NE(ok.out.find("op.tanh"), std::string::npos);
  const auto bad = run_cli({"--inject-fault", "tanh-grad-sign", "gradcheck"});
  EXPECT_EQ(bad.code, kExitCheckFailed);
  EXPECT_NE(bad.out.find("FAIL op.tanh"), std::string::npos);
  EXPECT_EQ(run_cli({"gradcheck"}).code, kExitOk);
}

TEST(ExitCodes, DistinguishConfigDataAndUsageErrors) {
  const fs::path dir = scratch("codes");
  EXPECT_EQ(run_cli({}).code, kExitConfig);
  EXPECT_EQ(run_cli({"no-such-command"}).code, kExitConfig);
  EXPECT_EQ(run_cli({"--config", (dir / "absent.json").string(), "train"}).code, kExitConfig);
  const fs::path bad = write_config(dir, R"({"model": {"hiden": 3}})");
  const auto r = run_cli({"--config", bad.string(), "train"});
  EXPECT_EQ(r.code, kExitConfig);
  EXPECT_NE(r.err.find("model.hiden"), std::string::npos) << r.err;
  EXPECT_EQ(run_cli({"--inject-fault", "nonsense", "gradcheck"}).code, kExitConfig);
  EXPECT_EQ(run_cli({"--out", (dir / "empty").string(), "evaluate"}).code, kExitData);
}

}  // namespace
}  // namespace pbgru::cli
