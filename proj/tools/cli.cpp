#include "cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>

#include <CLI11.hpp>

#include "tkgat/dataset.hpp"
#include "tkgat/errors.hpp"

namespace tkgat::cli {

using nlohmann::json;
using nlohmann::ordered_json;

// ---- serialization helpers ----

namespace {

ordered_json tensor_to_json(const Tensor& t) {
  ordered_json j;
  j["shape"] = t.shape();
  j["values"] = std::vector<double>(t.values().begin(), t.values().end());
  return j;
}

Tensor tensor_from_json(const json& j, const std::string& field) {
  if (!j.is_object() || !j.contains("shape") || !j.contains("values")) {
    throw ValidationError(field + ": expected {shape, values}");
  }
  try {
    return Tensor(j.at("shape").get<Shape>(), j.at("values").get<std::vector<double>>());
  } catch (const json::exception& e) {
    throw ValidationError(field + ": " + e.what());
  }
}

ordered_json metrics_to_json(const Metrics& m) {
  ordered_json j;
  j["mae"] = m.mae;
  j["mse"] = m.mse;
  j["rmse"] = m.rmse;
  j["n"] = m.n;
  return j;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open '" + path.string() + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_text(const std::string& text, const std::string& path, std::ostream& out) {
  if (path.empty()) {
    out << text;
    return;
  }
  std::ofstream file(path, std::ios::binary);
  if (!file) throw ValidationError("cannot write output file '" + path + "'");
  file << text;
  if (!file) throw ValidationError("failed writing output file '" + path + "'");
}

TemporalGraphDataset open_dataset(const std::string& path) {
  if (path.empty()) throw ValidationError("--dataset is required");
  if (!std::filesystem::exists(path)) throw ValidationError("dataset file not found: " + path);
  try {
    return load_dataset(path);
  } catch (const ValidationError& e) {
    throw ValidationError("dataset " + path + ": " + e.what());
  }
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

ordered_json config_to_json(const TrainConfig& c) {
  ordered_json j;
  j["variant"] = std::string(variant_name(c.variant));
  j["k"] = c.k;
  j["lambda"] = c.lambda_decay;
  j["hidden"] = c.hidden;
  j["epochs"] = c.epochs;
  j["lr"] = c.lr;
  j["seed"] = c.seed;
  j["train_ratio"] = c.train_ratio;
  j["leaky_slope"] = c.leaky_slope;
  return j;
}

TrainConfig config_from_json(const json& j) {
  try {
    TrainConfig c;
    c.variant = parse_variant(j.at("variant").get<std::string>());
    c.k = j.at("k").get<std::size_t>();
    c.lambda_decay = j.at("lambda").get<double>();
    c.hidden = j.at("hidden").get<std::size_t>();
    c.epochs = j.at("epochs").get<std::size_t>();
    c.lr = j.at("lr").get<double>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.train_ratio = j.at("train_ratio").get<double>();
    c.leaky_slope = j.at("leaky_slope").get<double>();
    return c;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
}

void save_model(const ModelFile& model, const std::filesystem::path& path) {
  ordered_json doc;
  doc["format_version"] = kModelFormatVersion;
  doc["version"] = kVersion;
  doc["config"] = config_to_json(model.config);
  ordered_json params;
  params["W"] = tensor_to_json(model.params.layer.W);
  params["a"] = tensor_to_json(model.params.layer.a);
  params["W_out"] = tensor_to_json(model.params.head.W_out);
  params["b_out"] = tensor_to_json(model.params.head.b_out);
  doc["params"] = std::move(params);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write model file '" + path.string() + "'");
  out << doc.dump(2) << '\n';
}

ModelFile load_model(const std::filesystem::path& path) {
  json doc;
  try {
    doc = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw ValidationError("model file " + path.string() + ": " + e.what());
  }
  if (!doc.is_object() || doc.value("format_version", -1) != kModelFormatVersion) {
    throw ValidationError("model file " + path.string() + ": unsupported format_version");
  }
  if (!doc.contains("config") || !doc.contains("params")) {
    throw ValidationError("model file " + path.string() + ": missing config or params");
  }
  ModelFile m;
  m.config = config_from_json(doc["config"]);
  const json& p = doc["params"];
  m.params.layer.W = tensor_from_json(p.value("W", json{}), "params.W");
  m.params.layer.a = tensor_from_json(p.value("a", json{}), "params.a");
  m.params.head.W_out = tensor_from_json(p.value("W_out", json{}), "params.W_out");
  m.params.head.b_out = tensor_from_json(p.value("b_out", json{}), "params.b_out");
  m.params.layer.lambda_decay = m.config.lambda_decay;
  m.params.layer.k = m.config.k;
  m.params.layer.leaky_slope = m.config.leaky_slope;
  m.params.layer.validate();
  return m;
}

// ---- gradient check problem ----

GradcheckProblem make_gradcheck_problem(std::uint64_t seed) {
  constexpr std::size_t kNodes = 6, kFeatures = 3, kHidden = 4, kK = 2;
  constexpr double kLambda = 0.3;
  std::mt19937_64 rng(seed);

  std::vector<Edge> edges;
  std::vector<double> weights;
  for (std::size_t dst = 0; dst < kNodes; ++dst) {
    for (std::size_t src = 0; src < kNodes; ++src) {
      if (src == dst || uniform01(rng) >= 0.5) continue;
      edges.push_back({src, dst});
      weights.push_back(0.1 + 0.9 * uniform01(rng));
    }
  }
  Tensor x = Tensor::zeros({kNodes, kFeatures});
  for (auto& v : x.values()) v = 4.0 * uniform01(rng) - 2.0;
  std::vector<double> y(kNodes);
  for (auto& v : y) v = 4.0 * uniform01(rng) - 2.0;

  GradcheckProblem problem{GraphSnapshot(kNodes, std::move(edges), std::move(weights), std::move(x),
                                         std::move(y)),
                           init_params(kFeatures, kHidden, rng, kLambda, kK)};
  // A non-zero bias keeps the head away from the trivial initial point.
  problem.params.head.b_out = Tensor::scalar(2.0 * uniform01(rng) - 1.0);
  return problem;
}

GradCheckResult run_gradcheck(const GradcheckProblem& problem, double h) {
  const NeighborIndex index(problem.snapshot);
  const auto& snap = problem.snapshot;
  ScalarFunction loss = [&](Tape& tape, std::span<const Var> p) {
    ModelParams shaped = problem.params;
    const ModelVars vars{{p[0], p[1]}, {p[2], p[3]}};
    Var y_hat = model_forward(tape, snap, index, shaped, vars, Variant::kTempoKGAT);
    Var y = tape.constant(Tensor::vector({snap.targets().begin(), snap.targets().end()}));
    return mse_loss(y, y_hat);
  };
  const auto& mp = problem.params;
  return grad_check(loss, {mp.layer.W, mp.layer.a, mp.head.W_out, mp.head.b_out}, h);
}

// ---- commands ----

namespace {

struct Options {
  std::string dataset;
  std::string out;
  std::uint64_t seed = 42;

  std::string model = "tempokgat";
  std::size_t k = 1;
  double lambda = 0.1;
  std::size_t hidden = 32;
  std::size_t epochs = 200;
  double lr = 0.001;
  double train_ratio = 0.8;
  double leaky_slope = 0.2;
  std::string save_model;
  std::string load_model;

  std::optional<std::size_t> k_min;
  std::optional<std::size_t> k_max;
  std::size_t threads = 1;

  std::size_t nodes = 15;
  std::size_t steps = 30;
  std::size_t lags = 4;
  double density = 1.0;
  std::string name = "synthetic";

  double threshold = 1e-5;
  double step = 1e-6;
};

void add_train_flags(CLI::App* cmd, Options& o) {
  cmd->add_option("--dataset", o.dataset, "Canonical dataset file")->required();
  cmd->add_option("--seed", o.seed, "Seed for parameter initialisation");
  cmd->add_option("--out", o.out, "Output path (stdout if omitted)");
  cmd->add_option("--model", o.model, "Layer variant")->check(CLI::IsMember({"tempokgat", "gat"}));
  cmd->add_option("--k", o.k, "Top-k neighborhood size")->check(CLI::PositiveNumber);
  cmd->add_option("--lambda", o.lambda, "Temporal decay rate")->check(CLI::NonNegativeNumber);
  cmd->add_option("--hidden", o.hidden, "Hidden width F'")->check(CLI::PositiveNumber);
  cmd->add_option("--epochs", o.epochs, "Training epochs")->check(CLI::PositiveNumber);
  cmd->add_option("--lr", o.lr, "Adam learning rate")->check(CLI::PositiveNumber);
  cmd->add_option("--train-ratio", o.train_ratio, "Chronological train fraction")->check(CLI::Range(0.0, 1.0));
  cmd->add_option("--leaky-slope", o.leaky_slope, "LeakyReLU negative slope")->check(CLI::Range(0.0, 1.0));
}

TrainConfig config_from(const Options& o) {
  TrainConfig c;
  c.variant = parse_variant(o.model);
  c.k = o.k;
  c.lambda_decay = o.lambda;
  c.hidden = o.hidden;
  c.epochs = o.epochs;
  c.lr = o.lr;
  c.seed = o.seed;
  c.train_ratio = o.train_ratio;
  c.leaky_slope = o.leaky_slope;
  c.validate();
  return c;
}

ordered_json make_report(const TrainConfig& config, const std::string& dataset, const Metrics& metrics,
                         const std::vector<EpochRecord>& epochs, double wall_seconds) {
  ordered_json report;
  report["config"] = config_to_json(config);
  report["config"]["dataset"] = dataset;
  report["metrics"] = metrics_to_json(metrics);
  ordered_json records = ordered_json::array();
  for (const auto& e : epochs) {
    ordered_json r;
    r["epoch"] = e.epoch;
    r["train_loss"] = e.train_loss;
    records.push_back(std::move(r));
  }
  report["epochs"] = std::move(records);
  report["wall_seconds"] = wall_seconds;
  report["version"] = kVersion;
  return report;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

int cmd_train(const Options& o, std::ostream& out) {
  const auto start = std::chrono::steady_clock::now();
  const TrainConfig config = config_from(o);
  const TemporalGraphDataset dataset = open_dataset(o.dataset);
  const Split split = temporal_split(dataset.snapshots, config.train_ratio);
  const TrainResult trained = train(split.train, config);
  const Metrics metrics = evaluate(trained.params, split.test, config.variant);

  if (!o.save_model.empty()) save_model({trained.params, config}, o.save_model);
  const auto report = make_report(config, o.dataset, metrics, trained.epochs, seconds_since(start));
  write_text(report.dump(2) + "\n", o.out, out);
  return 0;
}

int cmd_eval(const Options& o, std::ostream& out) {
  const auto start = std::chrono::steady_clock::now();
  if (!std::filesystem::exists(o.load_model)) {
    throw ValidationError("model file not found: " + o.load_model);
  }
  const ModelFile model = load_model(o.load_model);
  const TemporalGraphDataset dataset = open_dataset(o.dataset);
  const Split split = temporal_split(dataset.snapshots, model.config.train_ratio);
  const Metrics metrics = evaluate(model.params, split.test, model.config.variant);
  const auto report = make_report(model.config, o.dataset, metrics, {}, seconds_since(start));
  write_text(report.dump(2) + "\n", o.out, out);
  return 0;
}

int cmd_sweep_k(const Options& o, std::ostream& out, std::ostream& err) {
  const TrainConfig config = config_from(o);
  const TemporalGraphDataset dataset = open_dataset(o.dataset);

  const auto defaults = default_k_range(dataset);
  const std::size_t lo = o.k_min.value_or(1);
  const std::size_t hi = o.k_max.value_or(defaults.back());
  if (lo == 0) throw ContractError("--k-min must be at least 1");
  if (hi < lo) throw ContractError("--k-max must be >= --k-min");
  std::vector<std::size_t> ks;
  for (std::size_t k = lo; k <= hi; ++k) ks.push_back(k);

  const auto records = sweep_k(dataset, config, ks, o.threads);
  std::string csv = std::string(kSweepHeader) + "\n";
  bool failed = false;
  for (const auto& r : records) {
    csv += std::to_string(r.k) + ",";
    if (r.metrics) {
      csv += format_double(r.metrics->mae) + "," + format_double(r.metrics->mse) + "," +
             format_double(r.metrics->rmse);
    } else {
      csv += ",,";
      failed = true;
      err << "sweep-k: " << r.error << "\n";
    }
    csv += "," + std::to_string(config.seed) + "\n";
  }
  write_text(csv, o.out, out);
  return failed ? 1 : 0;
}

const char* param_name(std::size_t index) {
  static const char* names[] = {"W", "a", "W_out", "b_out"};
  return index < 4 ? names[index] : "?";
}

int cmd_gradcheck(const Options& o, std::ostream& out, std::ostream& err) {
  if (!(o.step > 0.0)) throw ContractError("--step must be positive");
  const auto start = std::chrono::steady_clock::now();
  const auto result = run_gradcheck(make_gradcheck_problem(o.seed), o.step);
  const bool pass = result.max_relative_error < o.threshold;

  ordered_json report;
  report["seed"] = o.seed;
  report["h"] = o.step;
  report["threshold"] = o.threshold;
  report["max_relative_error"] = result.max_relative_error;
  report["worst"] = {{"param", param_name(result.worst_param)},
                     {"entry", result.worst_entry},
                     {"analytic", result.analytic},
                     {"numeric", result.numeric}};
  report["pass"] = pass;
  report["wall_seconds"] = seconds_since(start);
  report["version"] = kVersion;
  if (!o.out.empty()) write_text(report.dump(2) + "\n", o.out, out);

  out << "max_relative_error " << format_double(result.max_relative_error) << " (threshold "
      << format_double(o.threshold) << ")\n";
  if (!pass) {
    err << "gradcheck failed: worst coordinate " << param_name(result.worst_param) << "["
        << result.worst_entry << "] analytic " << format_double(result.analytic) << " numeric "
        << format_double(result.numeric) << "\n";
    return 1;
  }
  return 0;
}

int cmd_gen_synthetic(const Options& o, std::ostream& out) {
  if (o.out.empty()) throw ContractError("--out is required");
  SyntheticConfig cfg;
  cfg.num_nodes = o.nodes;
  cfg.num_steps = o.steps;
  cfg.lags = o.lags;
  cfg.seed = o.seed;
  cfg.edge_density = o.density;
  cfg.name = o.name;
  const auto dataset = generate_synthetic(cfg);
  save_dataset(dataset, o.out);
  out << "wrote " << o.out << ": " << dataset.num_nodes << " nodes, "
      << dataset.snapshots.front().edges().size() << " edges, " << dataset.snapshots.size()
      << " snapshots\n";
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"TempoKGAT temporal graph attention: training, evaluation and diagnostics", "tkgat"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);
  Options o;

  auto* gen = app.add_subcommand("gen-synthetic", "Write a seeded synthetic dataset");
  gen->add_option("--out", o.out, "Dataset output path")->required();
  gen->add_option("--seed", o.seed, "Generator seed");
  gen->add_option("--nodes", o.nodes, "Number of nodes (>= 2)");
  gen->add_option("--steps", o.steps, "Raw observations per node");
  gen->add_option("--lags", o.lags, "Lag features per snapshot");
  gen->add_option("--density", o.density, "Probability of each directed edge");
  gen->add_option("--name", o.name, "Dataset name");

  auto* train_cmd = app.add_subcommand("train", "Train a model and write a JSON report");
  add_train_flags(train_cmd, o);
  train_cmd->add_option("--save-model", o.save_model, "Write the trained parameters here");

  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a saved model on the test split");
  eval_cmd->add_option("--dataset", o.dataset, "Canonical dataset file")->required();
  eval_cmd->add_option("--load-model", o.load_model, "Model file written by train --save-model")->required();
  eval_cmd->add_option("--out", o.out, "Report path (stdout if omitted)");

  auto* sweep = app.add_subcommand("sweep-k", "Train and evaluate across a range of k; write CSV");
  add_train_flags(sweep, o);
  sweep->add_option("--k-min", o.k_min, "Smallest k (default 1)");
  sweep->add_option("--k-max", o.k_max, "Largest k (default: rounded average in-degree)");
  sweep->add_option("--threads", o.threads, "Concurrent training runs")->check(CLI::PositiveNumber);

  auto* grad = app.add_subcommand("gradcheck", "Finite-difference check of the full loss gradient");
  grad->add_option("--seed", o.seed, "Seed for the random snapshot and parameters");
  grad->add_option("--threshold", o.threshold, "Maximum accepted relative error");
  grad->add_option("--step", o.step, "Central difference step h");
  grad->add_option("--out", o.out, "Optional JSON report path");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    if (gen->parsed()) return cmd_gen_synthetic(o, out);
    if (train_cmd->parsed()) return cmd_train(o, out);
    if (eval_cmd->parsed()) return cmd_eval(o, out);
    if (sweep->parsed()) return cmd_sweep_k(o, out, err);
    if (grad->parsed()) return cmd_gradcheck(o, out, err);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}

}  // namespace tkgat::cli
