// SPDX-License-Identifier: Apache-2.0
#include "pbgru/cli/run_config.hpp"

#include <json.hpp>

#include "pbgru/numerics/errors.hpp"
#include "pbgru/numerics/io_util.hpp"

namespace pbgru::cli {

using Json = nlohmann::ordered_json;

namespace {

graph::SimilarityMode similarity_mode_from(const std::string& s) {
  if (s == "negative_exponential") return graph::SimilarityMode::negative_exponential;
  if (s == "literal_exponential") return graph::SimilarityMode::literal_exponential;
  throw ConfigError("graph.similarity_mode must be negative_exponential or literal_exponential");
}

graph::LocalCost local_cost_from(const std::string& s) {
  if (s == "absolute") return graph::LocalCost::absolute;
  if (s == "squared") return graph::LocalCost::squared;
  throw ConfigError("graph.dtw_cost must be absolute or squared");
}

nn::DegreeSide degree_side_from(const std::string& s) {
  if (s == "right") return nn::DegreeSide::right;
  if (s == "left") return nn::DegreeSide::left;
  throw ConfigError("fdgcn.degree_side must be right or left");
}

const char* to_string(nn::DegreeSide s) { return s == nn::DegreeSide::right ? "right" : "left"; }

Json to_json(const RunConfig& c) {
  Json j;
  j["seed"] = c.seed;
  j["out"] = c.out;
  j["data"] = {{"ridership", c.data.ridership},
               {"edges", c.data.edges},
               {"trips", c.data.trips},
               {"stations", c.data.load.n},
               {"interval_minutes", c.data.load.interval_minutes},
               {"day_start_minute", c.data.load.day_start_minute},
               {"steps_per_day", c.data.load.steps_per_day},
               {"train_days", c.data.train_days},
               {"val_days", c.data.val_days},
               {"test_days", c.data.test_days}};
  j["graph"] = {{"k_max", c.graph.k_max},
                {"top_k", c.graph.similarity.top_k},
                {"threshold", c.graph.similarity.threshold},
                {"similarity_mode", graph::to_string(c.graph.similarity.mode)},
                {"dtw_cost", graph::to_string(c.graph.similarity.cost)},
                {"temperature", c.graph.similarity.temperature},
                {"od_prune_threshold", c.graph.od_prune_threshold},
                {"series_channels", data::to_string(c.graph.series)}};
  j["model"] = {{"t_in", c.model.t_in},
                {"t_out", c.model.t_out},
                {"hidden", c.model.hidden},
                {"stack_layers", c.model.stack_layers},
                {"dropout_heavy", c.model.dropout_heavy},
                {"dropout_light", c.model.dropout_light},
                {"ablation", nn::to_string(c.model.ablation)},
                {"literal_outflow_residual", c.model.literal_outflow_residual}};
  j["fdgcn"] = {{"k_hops", c.model.k_hops},
                {"layers", c.model.fd_layers},
                {"kernel_width", c.model.kernel_width},
                {"channels", c.model.fd_channels},
                {"degree_side", to_string(c.model.degree_side)}};
  j["train"] = {{"epochs", c.train.epochs},
                {"batch_size", c.train.batch_size},
                {"learning_rate", c.train.learning_rate},
                {"lr_decay", c.train.decay_factor},
                {"lr_decay_every", c.train.decay_every}};
  const auto& s = c.synth;
  j["synth"] = {{"stations", s.n},
                {"days", s.days},
                {"steps_per_day", s.steps_per_day},
                {"interval_minutes", s.interval_minutes},
                {"day_start_minute", s.day_start_minute},
                {"start_date", s.start_date},
                {"seed", c.synth_seed_set ? Json(s.seed) : Json(nullptr)},
                {"residential_share", s.mix.residential},
                {"commercial_share", s.mix.commercial},
                {"mixed_share", s.mix.mixed},
                {"od_hops", s.od_hops},
                {"minutes_per_hop", s.minutes_per_hop},
                {"base_volume", s.base_volume},
                {"scale_spread", s.scale_spread},
                {"extra_edge_ratio", s.extra_edge_ratio},
                {"day_factor_sd", s.day_factor_sd},
                {"role_shock_sd", s.role_shock_sd},
                {"role_shock_rho", s.role_shock_rho},
                {"station_noise_sd", s.station_noise_sd},
                {"station_noise_rho", s.station_noise_rho},
                {"poisson", s.poisson}};
  j["sweep"] = {{"k_min", c.sweep.k_min}, {"k_max", c.sweep.k_max}};
  Json variants = Json::array();
  for (auto a : c.ablations) variants.push_back(nn::to_string(a));
  j["ablate"] = {{"variants", variants}};
  return j;
}

class Reader {
 public:
  Reader(const Json& section, const Json& defaults, std::string prefix)
      : section_(section), prefix_(std::move(prefix)) {
    if (!section.is_object()) throw ConfigError("'" + prefix_ + "' must be an object");
    for (auto it = section.begin(); it != section.end(); ++it) {
      if (!defaults.contains(it.key())) throw ConfigError("unknown config key '" + key(it.key()) + "'");
    }
  }

  template <typename T>
  void read(const char* name, T& field) const {
    if (!section_.contains(name)) return;
    const Json& v = section_.at(name);
    try {
      if constexpr (std::is_same_v<T, bool>) {
        if (!v.is_boolean()) throw ConfigError("");
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!v.is_string()) throw ConfigError("");
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!v.is_number()) throw ConfigError("");
      } else if constexpr (std::is_unsigned_v<T>) {
        if (!v.is_number_unsigned()) throw ConfigError("");
      } else {
        if (!v.is_number_integer()) throw ConfigError("");
      }
      field = v.get<T>();
    } catch (const ConfigError&) {
      throw ConfigError("config key '" + key(name) + "' has the wrong type");
    }
  }

  bool has(const char* name) const { return section_.contains(name); }
  const Json& raw(const char* name) const { return section_.at(name); }
  std::string key(const std::string& name) const { return prefix_.empty() ? name : prefix_ + "." + name; }

 private:
  const Json& section_;
  std::string prefix_;
};

}  // namespace

data::SynthOptions RunConfig::effective_synth() const {
  data::SynthOptions s = synth;
  if (!synth_seed_set) s.seed = seed;
  return s;
}

void RunConfig::validate() const {
  model.validate();
  train.validate();
  if (graph_k_max() < model.k_hops) throw ConfigError("graph.k_max must be >= fdgcn.k_hops");
  if (graph.similarity.threshold < 0.0) throw ConfigError("graph.threshold must be >= 0");
  if (sweep.k_min < 1 || sweep.k_min > sweep.k_max) throw ConfigError("sweep needs 1 <= k_min <= k_max");
  if (ablations.empty()) throw ConfigError("ablate.variants must not be empty");
  if (!data.ridership.empty() && data.edges.empty()) throw ConfigError("data.edges is required with data.ridership");
  if (!data.ridership.empty() && data.trips.empty()) throw ConfigError("data.trips is required with data.ridership");
  if (data.ridership.empty() && synth.n < 2) throw ConfigError("synth.stations must be >= 2");
  const std::size_t split = data.train_days + data.val_days + data.test_days;
  if (split != 0 && data.train_days == 0) throw ConfigError("data.train_days must be positive");
}

RunConfig parse_run_config(std::string_view json_text) {
  Json doc;
  try {
    doc = Json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  RunConfig c;
  const Json defaults = to_json(c);
  const Reader top(doc, defaults, "");
  top.read("seed", c.seed);
  top.read("out", c.out);
  if (top.has("data")) {
    const Reader r(doc["data"], defaults["data"], "data");
    r.read("ridership", c.data.ridership);
    r.read("edges", c.data.edges);
    r.read("trips", c.data.trips);
    r.read("stations", c.data.load.n);
    r.read("interval_minutes", c.data.load.interval_minutes);
    r.read("day_start_minute", c.data.load.day_start_minute);
    r.read("steps_per_day", c.data.load.steps_per_day);
    r.read("train_days", c.data.train_days);
    r.read("val_days", c.data.val_days);
    r.read("test_days", c.data.test_days);
  }
  if (top.has("graph")) {
    const Reader r(doc["graph"], defaults["graph"], "graph");
    r.read("k_max", c.graph.k_max);
    r.read("top_k", c.graph.similarity.top_k);
    r.read("threshold", c.graph.similarity.threshold);
    std::string s;
    if (r.has("similarity_mode")) {
      r.read("similarity_mode", s);
      c.graph.similarity.mode = similarity_mode_from(s);
    }
    if (r.has("dtw_cost")) {
      r.read("dtw_cost", s);
      c.graph.similarity.cost = local_cost_from(s);
    }
    r.read("temperature", c.graph.similarity.temperature);
    r.read("od_prune_threshold", c.graph.od_prune_threshold);
    if (r.has("series_channels")) {
      r.read("series_channels", s);
      try {
        c.graph.series = data::series_channels_from_string(s);
      } catch (const std::exception&) {
        throw ConfigError("graph.series_channels must be both, inflow or outflow");
      }
    }
  }
  if (top.has("model")) {
    const Reader r(doc["model"], defaults["model"], "model");
    r.read("t_in", c.model.t_in);
    r.read("t_out", c.model.t_out);
    r.read("hidden", c.model.hidden);
    r.read("stack_layers", c.model.stack_layers);
    r.read("dropout_heavy", c.model.dropout_heavy);
    r.read("dropout_light", c.model.dropout_light);
    std::string s;
    if (r.has("ablation")) {
      r.read("ablation", s);
      c.model.ablation = nn::ablation_from_string(s);
    }
    r.read("literal_outflow_residual", c.model.literal_outflow_residual);
  }
  if (top.has("fdgcn")) {
    const Reader r(doc["fdgcn"], defaults["fdgcn"], "fdgcn");
    r.read("k_hops", c.model.k_hops);
    r.read("layers", c.model.fd_layers);
    r.read("kernel_width", c.model.kernel_width);
    r.read("channels", c.model.fd_channels);
    if (r.has("degree_side")) {
      std::string s;
      r.read("degree_side", s);
      c.model.degree_side = degree_side_from(s);
    }
  }
  if (top.has("train")) {
    const Reader r(doc["train"], defaults["train"], "train");
    r.read("epochs", c.train.epochs);
    r.read("batch_size", c.train.batch_size);
    r.read("learning_rate", c.train.learning_rate);
    r.read("lr_decay", c.train.decay_factor);
    r.read("lr_decay_every", c.train.decay_every);
  }
  if (top.has("synth")) {
    const Reader r(doc["synth"], defaults["synth"], "synth");
    auto& s = c.synth;
    r.read("stations", s.n);
    r.read("days", s.days);
    r.read("steps_per_day", s.steps_per_day);
    r.read("interval_minutes", s.interval_minutes);
    r.read("day_start_minute", s.day_start_minute);
    r.read("start_date", s.start_date);
    if (r.has("seed") && !r.raw("seed").is_null()) {
      r.read("seed", s.seed);
      c.synth_seed_set = true;
    }
    r.read("residential_share", s.mix.residential);
    r.read("commercial_share", s.mix.commercial);
    r.read("mixed_share", s.mix.mixed);
    r.read("od_hops", s.od_hops);
    r.read("minutes_per_hop", s.minutes_per_hop);
    r.read("base_volume", s.base_volume);
    r.read("scale_spread", s.scale_spread);
    r.read("extra_edge_ratio", s.extra_edge_ratio);
    r.read("day_factor_sd", s.day_factor_sd);
    r.read("role_shock_sd", s.role_shock_sd);
    r.read("role_shock_rho", s.role_shock_rho);
    r.read("station_noise_sd", s.station_noise_sd);
    r.read("station_noise_rho", s.station_noise_rho);
    r.read("poisson", s.poisson);
  }
  if (top.has("sweep")) {
    const Reader r(doc["sweep"], defaults["sweep"], "sweep");
    r.read("k_min", c.sweep.k_min);
    r.read("k_max", c.sweep.k_max);
  }
  if (top.has("ablate")) {
    const Reader r(doc["ablate"], defaults["ablate"], "ablate");
    if (r.has("variants")) {
      const Json& v = r.raw("variants");
      if (!v.is_array()) throw ConfigError("ablate.variants must be an array of tags");
      c.ablations.clear();
      for (const auto& tag : v) {
        if (!tag.is_string()) throw ConfigError("ablate.variants must be an array of tags");
        c.ablations.push_back(nn::ablation_from_string(tag.get<std::string>()));
      }
    }
  }
  c.validate();
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::string text;
  try {
    text = read_text_file(path);
  } catch (const std::exception& e) {
    throw ConfigError("cannot read config " + path.string() + ": " + e.what());
  }
  return parse_run_config(text);
}

std::string run_config_to_json(const RunConfig& cfg) { return to_json(cfg).dump(2) + "\n"; }

std::string config_hash(const RunConfig& cfg) {
  Json j = to_json(cfg);
  j.erase("out");
  return hex64(fnv1a64(j.dump()));
}

std::string graph_inputs_hash(const RunConfig& cfg) {
  const Json full = to_json(cfg);
  Json j;
  j["data"] = full["data"];
  j["graph"] = full["graph"];
  j["graph"].erase("k_max");
  if (cfg.data.ridership.empty()) {
    j["synth"] = full["synth"];
    j["synth"]["seed"] = cfg.effective_synth().seed;
  }
  return hex64(fnv1a64(j.dump()));
}

}  // namespace pbgru::cli
