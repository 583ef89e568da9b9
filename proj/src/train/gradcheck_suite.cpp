// SPDX-License-Identifier: Apache-2.0
#include "pbgru/train/gradcheck_suite.hpp"

#include <json.hpp>

#include <chrono>
#include <cmath>
#include <functional>
#include <map>
#include <sstream>

#include "pbgru/graph/graph_builder.hpp"
#include "pbgru/nn/model.hpp"
#include "pbgru/numerics/grad_check.hpp"
#include "pbgru/numerics/io_util.hpp"
#include "pbgru/numerics/ops.hpp"
#include "pbgru/train/training.hpp"

namespace pbgru::train {

bool SuiteReport::passed() const {
  for (const auto& e : entries)
    if (!e.passed) return false;
  return !entries.empty();
}

double SuiteReport::max_relative_error() const {
  double m = 0.0;
  for (const auto& e : entries) m = std::max(m, e.max_relative_error);
  return m;
}

namespace {

Tensor normal_leaf(Rng& rng, Shape shape, double scale = 1.0) {
  std::vector<double> v(shape_numel(shape));
  for (double& x : v) x = scale * rng.normal();
  return Tensor::from_values(std::move(shape), std::move(v), true);
}

Tensor away_from_zero_leaf(Rng& rng, Shape shape) {
  std::vector<double> v(shape_numel(shape));
  for (double& x : v) x = (rng.bernoulli(0.5) ? 1.0 : -1.0) * (0.1 + rng.uniform());
  return Tensor::from_values(std::move(shape), std::move(v), true);
}

Tensor constant(Rng& rng, Shape shape) {
  std::vector<double> v(shape_numel(shape));
  for (double& x : v) x = rng.normal();
  return Tensor::from_values(std::move(shape), std::move(v));
}

class Suite {
 public:
  Suite(std::uint64_t seed, double tolerance) : rng_(seed) { options_.tolerance = tolerance; }

  void check(const std::string& group, std::vector<NamedTensor> inputs, const std::function<Tensor()>& loss) {
    const auto report = grad_check(loss, inputs, options_);
    for (const auto& e : report.entries) out_.push_back({group, e.name, e.count, e.max_relative_error, e.passed});
  }

  Rng& rng() { return rng_; }
  std::vector<SuiteEntry> take() { return std::move(out_); }

 private:
  Rng rng_;
  GradCheckOptions options_;
  std::vector<SuiteEntry> out_;
};

graph::GraphSet small_graphs(Rng& rng, std::size_t n, std::size_t k) {
  graph::StationGraph g{n, {}};
  for (std::size_t i = 1; i < n; ++i) g.edges.emplace_back(i - 1, i);
  std::vector<std::vector<double>> series(n, std::vector<double>(6));
  for (auto& s : series)
    for (double& v : s) v = rng.normal();
  std::vector<graph::Trip> trips;
  for (std::size_t o = 0; o < n; ++o)
    for (std::size_t d = 0; d < n; ++d)
      if (o != d) trips.push_back({o, d, static_cast<double>(1 + rng.below(20))});
  graph::GraphOptions opts;
  opts.k_max = k;
  opts.similarity.top_k = 2;
  return graph::build_graph_set(g, series, trips, opts);
}

void primitive_checks(Suite& s) {
  Rng& rng = s.rng();
  {
    auto a = normal_leaf(rng, {3, 4}), b = normal_leaf(rng, {4, 2});
    const Tensor p = constant(rng, {3, 2});
    s.check("op.matmul", {{"a", a}, {"b", b}}, [=] { return sum(mul(matmul(a, b), p)); });
  }
  {
    auto x = normal_leaf(rng, {3, 4}), w = normal_leaf(rng, {5, 4}), b = normal_leaf(rng, {5});
    const Tensor p = constant(rng, {3, 5});
    s.check("op.linear", {{"x", x}, {"w", w}, {"b", b}}, [=] { return sum(mul(linear(x, w, b), p)); });
  }
  {
    auto a = normal_leaf(rng, {3, 4});
    const Tensor p = constant(rng, {4, 3});
    s.check("op.transpose", {{"a", a}}, [=] { return sum(mul(transpose(a), p)); });
  }
  using Binary = Tensor (*)(const Tensor&, const Tensor&);
  for (auto [name, f] : {std::pair<const char*, Binary>{"op.add", &add}, {"op.sub", &sub}, {"op.mul", &mul}}) {
    auto a = normal_leaf(rng, {2, 3}), b = normal_leaf(rng, {2, 3});
    const Tensor p = constant(rng, {2, 3});
    s.check(name, {{"a", a}, {"b", b}}, [=] { return sum(mul(f(a, b), p)); });
  }
  {
    auto x = normal_leaf(rng, {2, 3});
    const Tensor p = constant(rng, {2, 3});
    s.check("op.affine", {{"x", x}}, [=] { return sum(mul(affine(x, -1.7, 0.3), p)); });
  }
  using Unary = Tensor (*)(const Tensor&);
  for (auto [name, f] : {std::pair<const char*, Unary>{"op.tanh", &tanh}, {"op.sigmoid", &sigmoid}, {"op.exp", &exp}}) {
    auto x = normal_leaf(rng, {2, 3});
    const Tensor p = constant(rng, {2, 3});
    s.check(name, {{"x", x}}, [=] { return sum(mul(f(x), p)); });
  }
  for (auto [name, f] : {std::pair<const char*, Unary>{"op.relu", &relu}, {"op.abs", &abs}}) {
    auto x = away_from_zero_leaf(rng, {2, 3});
    const Tensor p = constant(rng, {2, 3});
    s.check(name, {{"x", x}}, [=] { return sum(mul(f(x), p)); });
  }
  {
    auto x = normal_leaf(rng, {2, 3});
    const Tensor p = constant(rng, {2, 3});
    s.check("op.map", {{"x", x}}, [=] {
      return sum(mul(map_unary(x, [](double v) { return v * v * v; }, [](double v) { return 3 * v * v; }), p));
    });
  }
  {
    auto x = normal_leaf(rng, {3, 4}), b = normal_leaf(rng, {4});
    const Tensor p = constant(rng, {3, 4});
    s.check("op.add_bias", {{"x", x}, {"b", b}}, [=] { return sum(mul(add_bias(x, b), p)); });
  }
  {
    auto x = normal_leaf(rng, {3, 4}), r = normal_leaf(rng, {3, 1});
    const Tensor p = constant(rng, {3, 4});
    s.check("op.scale_rows", {{"x", x}, {"s", r}}, [=] { return sum(mul(scale_rows(x, r), p)); });
  }
  {
    auto a = normal_leaf(rng, {3, 2}), b = normal_leaf(rng, {3, 3});
    const Tensor p = constant(rng, {3, 5});
    s.check("op.concat_last", {{"a", a}, {"b", b}}, [=] { return sum(mul(concat_last({a, b}), p)); });
  }
  {
    auto x = normal_leaf(rng, {3, 5});
    const Tensor p = constant(rng, {3, 2});
    s.check("op.slice_last", {{"x", x}}, [=] { return sum(mul(slice_last(x, 1, 3), p)); });
  }
  {
    auto x = normal_leaf(rng, {2, 6});
    const Tensor p = constant(rng, {3, 4});
    s.check("op.reshape", {{"x", x}}, [=] { return sum(mul(reshape(x, {3, 4}), p)); });
  }
  {
    auto x = normal_leaf(rng, {2, 3});
    const Tensor p = constant(rng, {4});
    s.check("op.gather", {{"x", x}}, [=] { return sum(mul(gather(x, {5, 0, 5, 2}, {4}), p)); });
  }
  for (std::size_t axis : {0u, 1u}) {
    auto x = normal_leaf(rng, {3, 4});
    const Tensor p = constant(rng, {3, 4});
    s.check("op.softmax" + std::to_string(axis), {{"x", x}}, [=] { return sum(mul(softmax(x, axis), p)); });
  }
  {
    auto x = normal_leaf(rng, {2, 3});
    s.check("op.sum", {{"x", x}}, [=] { return affine(sum(x), 0.5, 0.0); });
    auto y = normal_leaf(rng, {2, 3});
    s.check("op.mean", {{"y", y}}, [=] { return mean(mul(y, y)); });
  }
  {
    auto pred = normal_leaf(rng, {3, 4});
    const Tensor target = constant(rng, {3, 4});
    s.check("op.l1_loss", {{"pred", pred}}, [=] { return l1_loss(pred, target); });
  }
}

void module_checks(Suite& s) {
  Rng& rng = s.rng();
  const std::size_t n = 4, t_in = 4, hidden = 8, k = 2;
  {
    const auto cell = nn::GruCellParams::init(2, hidden, rng);
    std::vector<Tensor> xs;
    for (int t = 0; t < 3; ++t) xs.push_back(constant(rng, {n, 2}));
    const Tensor p = constant(rng, {n, hidden});
    std::vector<NamedTensor> named;
    cell.append_named("gru_cell", named);
    s.check("gru_cell_3_steps", named, [=] { return sum(mul(nn::gru_sequence(xs, cell).back(), p)); });
  }
  {
    const auto sg = nn::SagruParams::init(2, hidden, 1, rng);
    std::vector<Tensor> xs;
    for (std::size_t t = 0; t < t_in; ++t) xs.push_back(constant(rng, {n, 2}));
    const Tensor p = constant(rng, {n, hidden});
    std::vector<NamedTensor> named;
    sg.append_named(named);
    s.check("sagru", named, [=] { return sum(mul(nn::sagru_forward(xs, sg).attention.output, p)); });
  }
  const auto gs = small_graphs(rng, n, k);
  std::vector<double> x(t_in * n * 2);
  for (double& v : x) v = rng.normal();
  const auto in = nn::make_batch_input(x, 1, n, t_in);
  {
    const auto fs = nn::FsgcnParams::init(2 * t_in, rng);
    const Tensor p = constant(rng, {n, 2 * t_in});
    std::vector<NamedTensor> named;
    fs.append_named(named);
    s.check("fsgcn", named, [=] {
      const auto r =
          nn::fsgcn_forward(in, gs.physical_norm, gs.similarity_norm, fs, nn::FsgcnGraphs::physical_and_similarity);
      return add(sum(mul(r.o_if, p)), sum(mul(r.o_of, p)));
    });
  }
  {
    const auto fd = nn::FdgcnParams::init(t_in, t_in, 2, 2, rng);
    const auto ops = nn::diffusion_operators(gs, k);
    const Tensor p = constant(rng, {n, t_in});
    std::vector<NamedTensor> named;
    fd.append_named(named);
    s.check("fdgcn", named, [=] { return sum(mul(nn::fdgcn_forward(in, ops, fd).o_of, p)); });
  }
  {
    nn::ModelConfig cfg;
    cfg.t_in = t_in;
    cfg.t_out = 4;
    cfg.hidden = hidden;
    cfg.k_hops = k;
    const auto params = nn::ModelParams::init(cfg, rng);
    const auto graphs = nn::ModelGraphs::from_graph_set(gs, cfg);
    const Tensor target = constant(rng, {n, 2 * cfg.t_out});
    s.check("model", params.named_parameters(),
            [=] { return l1_loss(nn::forward(in, graphs, params, cfg, nn::Mode::eval).prediction, target); });
  }
}

}  // namespace

SuiteReport run_gradcheck_suite(std::uint64_t seed, double tolerance) {
  const auto start = std::chrono::steady_clock::now();
  Suite suite(seed, tolerance);
  primitive_checks(suite);
  module_checks(suite);
  SuiteReport report;
  report.entries = suite.take();
  report.tolerance = tolerance;
  report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

namespace {
struct GroupSummary {
  double worst = 0.0;
  std::string worst_parameter;
  std::size_t count = 0;
  bool passed = true;
};

std::vector<std::pair<std::string, GroupSummary>> summarize(const SuiteReport& report) {
  std::vector<std::pair<std::string, GroupSummary>> groups;
  for (const auto& e : report.entries) {
    if (groups.empty() || groups.back().first != e.group) groups.push_back({e.group, {}});
    auto& g = groups.back().second;
    g.count += e.count;
    g.passed = g.passed && e.passed;
    if (g.worst_parameter.empty() || e.max_relative_error > g.worst) {
      g.worst = e.max_relative_error;
      g.worst_parameter = e.parameter;
    }
  }
  return groups;
}
}  // namespace

std::string suite_report_to_text(const SuiteReport& report) {
  std::ostringstream out;
  for (const auto& [name, g] : summarize(report)) {
    out << (g.passed ? "ok   " : "FAIL ") << name << "  max_rel_err=" << format_double(g.worst) << " ("
        << g.worst_parameter << ", " << g.count << " values)\n";
  }
  out << (report.passed() ? "PASS" : "FAIL") << " max_rel_err=" << format_double(report.max_relative_error())
      << " tolerance=" << format_double(report.tolerance) << "\n";
  return out.str();
}

std::string suite_report_to_json(const SuiteReport& report) {
  nlohmann::ordered_json j;
  j["passed"] = report.passed();
  j["tolerance"] = report.tolerance;
  j["max_relative_error"] = report.max_relative_error();
  nlohmann::ordered_json groups = nlohmann::ordered_json::array();
  for (const auto& [name, g] : summarize(report)) {
    nlohmann::ordered_json params = nlohmann::ordered_json::array();
    for (const auto& e : report.entries) {
      if (e.group != name) continue;
      params.push_back({{"name", e.parameter},
                        {"count", e.count},
                        {"max_relative_error", e.max_relative_error},
                        {"passed", e.passed}});
    }
    groups.push_back({{"group", name}, {"passed", g.passed}, {"max_relative_error", g.worst}, {"parameters", params}});
  }
  j["groups"] = groups;
  return j.dump(2) + "\n";
}

}  // namespace pbgru::train
