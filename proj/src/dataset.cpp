#include "tkgat/dataset.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include <json.hpp>

#include "tkgat/errors.hpp"
#include "tkgat/model.hpp"

namespace tkgat {

using nlohmann::json;
using nlohmann::ordered_json;

void TemporalGraphDataset::validate() const {
  if (num_nodes == 0) throw ValidationError("num_nodes: must be at least 1");
  if (lags == 0) throw ValidationError("lags: must be at least 1");
  if (snapshots.size() < 2) {
    throw ValidationError("dataset needs at least 2 snapshots, got " + std::to_string(snapshots.size()));
  }
  for (std::size_t t = 0; t < snapshots.size(); ++t) {
    const auto& s = snapshots[t];
    if (s.num_nodes() != num_nodes || s.num_features() != lags) {
      throw ValidationError("snapshot " + std::to_string(t) + ": expected " + std::to_string(num_nodes) +
                            " nodes x " + std::to_string(lags) + " features, got " +
                            shape_to_string(s.features().shape()));
    }
    if (temporal == TemporalNature::kStatic && !s.same_topology(snapshots.front())) {
      throw ValidationError("snapshot " + std::to_string(t) +
                            ": static dataset with topology differing from snapshot 0");
    }
  }
}

double average_in_degree(const TemporalGraphDataset& dataset) {
  if (dataset.snapshots.empty()) return 0.0;
  double total = 0.0;
  for (const auto& s : dataset.snapshots) total += average_in_degree(s);
  return total / static_cast<double>(dataset.snapshots.size());
}

std::vector<GraphSnapshot> build_lagged_snapshots(const Series& series, std::size_t lags,
                                                  const std::vector<Edge>& edges,
                                                  const std::vector<double>& weights) {
  if (lags == 0) throw ContractError("lags must be at least 1");
  if (series.size() <= lags) {
    throw ValidationError("series: insufficient history, " + std::to_string(series.size()) +
                          " observations for " + std::to_string(lags) + " lags");
  }
  const std::size_t n = series.front().size();
  for (std::size_t t = 0; t < series.size(); ++t) {
    if (series[t].size() != n) {
      throw ValidationError("series[" + std::to_string(t) + "]: expected " + std::to_string(n) +
                            " nodes, got " + std::to_string(series[t].size()));
    }
  }

  std::vector<GraphSnapshot> out;
  out.reserve(series.size() - lags);
  for (std::size_t t = 0; t + lags < series.size(); ++t) {
    Tensor x = Tensor::zeros({n, lags});
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t f = 0; f < lags; ++f) x.at(i, f) = series[t + f][i];
      y[i] = series[t + lags][i];
    }
    out.emplace_back(n, edges, weights, std::move(x), std::move(y));
  }
  return out;
}

// ---- JSON ----

namespace {

[[noreturn]] void fail(const std::string& field, const std::string& what) {
  throw ValidationError(field + ": " + what);
}

const json& require(const json& doc, const char* key) {
  auto it = doc.find(key);
  if (it == doc.end()) fail(key, "missing");
  return *it;
}

std::size_t as_count(const json& v, const std::string& field) {
  if (!v.is_number_integer() || v.get<std::int64_t>() < 0) fail(field, "expected a non-negative integer");
  return v.get<std::size_t>();
}

double as_number(const json& v, const std::string& field) {
  if (!v.is_number()) fail(field, "expected a number");
  return v.get<double>();
}

const json& as_array(const json& v, const std::string& field, std::optional<std::size_t> length = {}) {
  if (!v.is_array()) fail(field, "expected an array");
  if (length && v.size() != *length) {
    fail(field, "expected " + std::to_string(*length) + " entries, got " + std::to_string(v.size()));
  }
  return v;
}

std::vector<Edge> parse_edges(const json& v, const std::string& field, std::size_t num_nodes) {
  as_array(v, field);
  std::vector<Edge> edges;
  edges.reserve(v.size());
  for (std::size_t e = 0; e < v.size(); ++e) {
    const std::string f = field + "[" + std::to_string(e) + "]";
    as_array(v[e], f, 2);
    const std::size_t src = as_count(v[e][0], f);
    const std::size_t dst = as_count(v[e][1], f);
    if (src >= num_nodes || dst >= num_nodes) {
      fail(f, "node index out of range [0, " + std::to_string(num_nodes) + ")");
    }
    edges.push_back({src, dst});
  }
  return edges;
}

std::vector<double> parse_numbers(const json& v, const std::string& field,
                                  std::optional<std::size_t> length = {}) {
  as_array(v, field, length);
  std::vector<double> out;
  out.reserve(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out.push_back(as_number(v[i], field + "[" + std::to_string(i) + "]"));
  return out;
}

GraphSnapshot make_snapshot(std::size_t n, std::vector<Edge> edges, std::vector<double> weights,
                            Tensor x, std::vector<double> y, const std::string& where) {
  try {
    return GraphSnapshot(n, std::move(edges), std::move(weights), std::move(x), std::move(y));
  } catch (const ValidationError& e) {
    fail(where, e.what());
  }
}

ordered_json edges_json(const GraphSnapshot& s) {
  ordered_json out = ordered_json::array();
  for (const auto& e : s.edges()) out.push_back({e.src, e.dst});
  return out;
}

ordered_json weights_json(const GraphSnapshot& s) {
  return ordered_json(std::vector<double>(s.weights().begin(), s.weights().end()));
}

}  // namespace

TemporalGraphDataset parse_dataset(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("parse error: ") + e.what());
  }
  if (!doc.is_object()) throw ValidationError("top level: expected a JSON object");

  static const std::set<std::string> known{"name",    "temporal", "num_nodes", "lags",
                                           "edges",   "weights",  "edges_t",   "weights_t",
                                           "features", "targets", "series"};
  for (const auto& [key, _] : doc.items()) {
    if (!known.contains(key)) fail(key, "unknown field");
  }

  TemporalGraphDataset ds;
  const json& name = require(doc, "name");
  if (!name.is_string()) fail("name", "expected a string");
  ds.name = name.get<std::string>();

  const json& temporal = require(doc, "temporal");
  if (temporal == "static") {
    ds.temporal = TemporalNature::kStatic;
  } else if (temporal == "dynamic") {
    ds.temporal = TemporalNature::kDynamic;
  } else {
    fail("temporal", "expected \"static\" or \"dynamic\"");
  }
  ds.num_nodes = as_count(require(doc, "num_nodes"), "num_nodes");
  ds.lags = as_count(require(doc, "lags"), "lags");
  if (ds.num_nodes == 0) fail("num_nodes", "must be at least 1");
  if (ds.lags == 0) fail("lags", "must be at least 1");
  const std::size_t n = ds.num_nodes;

  const bool has_features = doc.contains("features") || doc.contains("targets");
  const bool has_series = doc.contains("series");
  if (has_features == has_series) {
    fail("features/series", "exactly one of (features + targets) or series must be present");
  }

  // Number of snapshots, needed to size dynamic topologies.
  std::size_t num_snapshots = 0;
  Series series;
  if (has_series) {
    const json& s = as_array(doc["series"], "series");
    for (std::size_t t = 0; t < s.size(); ++t) {
      series.push_back(parse_numbers(s[t], "series[" + std::to_string(t) + "]", n));
    }
    if (series.size() <= ds.lags) {
      fail("series", "insufficient history: " + std::to_string(series.size()) +
                         " observations for " + std::to_string(ds.lags) + " lags");
    }
    num_snapshots = series.size() - ds.lags;
  } else {
    num_snapshots = as_array(require(doc, "features"), "features").size();
    as_array(require(doc, "targets"), "targets", num_snapshots);
  }

  std::vector<std::vector<Edge>> edges_t;
  std::vector<std::vector<double>> weights_t;
  if (ds.temporal == TemporalNature::kStatic) {
    if (doc.contains("edges_t") || doc.contains("weights_t")) {
      fail("edges_t", "not allowed in a static dataset");
    }
    auto edges = parse_edges(require(doc, "edges"), "edges", n);
    auto weights = parse_numbers(require(doc, "weights"), "weights");
    if (weights.size() != edges.size()) {
      fail("weights", "expected " + std::to_string(edges.size()) + " entries (one per edge), got " +
                          std::to_string(weights.size()));
    }
    edges_t.assign(num_snapshots, edges);
    weights_t.assign(num_snapshots, weights);
  } else {
    if (doc.contains("edges") || doc.contains("weights")) {
      fail("edges", "not allowed in a dynamic dataset (use edges_t/weights_t)");
    }
    const json& et = as_array(require(doc, "edges_t"), "edges_t", num_snapshots);
    const json& wt = as_array(require(doc, "weights_t"), "weights_t", num_snapshots);
    for (std::size_t t = 0; t < num_snapshots; ++t) {
      const std::string suffix = "[" + std::to_string(t) + "]";
      edges_t.push_back(parse_edges(et[t], "edges_t" + suffix, n));
      weights_t.push_back(parse_numbers(wt[t], "weights_t" + suffix, edges_t.back().size()));
    }
  }

  if (has_series) {
    for (std::size_t t = 0; t < num_snapshots; ++t) {
      const std::string where = "snapshot " + std::to_string(t);
      Tensor x = Tensor::zeros({n, ds.lags});
      std::vector<double> y(n);
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t f = 0; f < ds.lags; ++f) x.at(i, f) = series[t + f][i];
        y[i] = series[t + ds.lags][i];
      }
      ds.snapshots.push_back(make_snapshot(n, std::move(edges_t[t]), std::move(weights_t[t]),
                                           std::move(x), std::move(y), where));
    }
    ds.series = std::move(series);
  } else {
    const json& features = doc["features"];
    const json& targets = doc["targets"];
    for (std::size_t t = 0; t < num_snapshots; ++t) {
      const std::string ft = "features[" + std::to_string(t) + "]";
      as_array(features[t], ft, n);
      Tensor x = Tensor::zeros({n, ds.lags});
      for (std::size_t i = 0; i < n; ++i) {
        const auto row = parse_numbers(features[t][i], ft + "[" + std::to_string(i) + "]", ds.lags);
        for (std::size_t f = 0; f < ds.lags; ++f) x.at(i, f) = row[f];
      }
      auto y = parse_numbers(targets[t], "targets[" + std::to_string(t) + "]", n);
      ds.snapshots.push_back(make_snapshot(n, std::move(edges_t[t]), std::move(weights_t[t]),
                                           std::move(x), std::move(y), "snapshot " + std::to_string(t)));
    }
  }

  ds.validate();
  return ds;
}

TemporalGraphDataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open dataset file '" + path.string() + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_dataset(buffer.str());
}

std::string dump_dataset(const TemporalGraphDataset& dataset) {
  dataset.validate();
  ordered_json doc;
  doc["name"] = dataset.name;
  doc["temporal"] = dataset.temporal == TemporalNature::kStatic ? "static" : "dynamic";
  doc["num_nodes"] = dataset.num_nodes;
  doc["lags"] = dataset.lags;

  if (dataset.temporal == TemporalNature::kStatic) {
    doc["edges"] = edges_json(dataset.snapshots.front());
    doc["weights"] = weights_json(dataset.snapshots.front());
  } else {
    ordered_json et = ordered_json::array();
    ordered_json wt = ordered_json::array();
    for (const auto& s : dataset.snapshots) {
      et.push_back(edges_json(s));
      wt.push_back(weights_json(s));
    }
    doc["edges_t"] = std::move(et);
    doc["weights_t"] = std::move(wt);
  }

  if (dataset.series) {
    doc["series"] = *dataset.series;
  } else {
    ordered_json features = ordered_json::array();
    ordered_json targets = ordered_json::array();
    for (const auto& s : dataset.snapshots) {
      ordered_json rows = ordered_json::array();
      for (std::size_t i = 0; i < s.num_nodes(); ++i) {
        std::vector<double> r(s.num_features());
        for (std::size_t f = 0; f < r.size(); ++f) r[f] = s.features().at(i, f);
        rows.push_back(std::move(r));
      }
      features.push_back(std::move(rows));
      targets.push_back(std::vector<double>(s.targets().begin(), s.targets().end()));
    }
    doc["features"] = std::move(features);
    doc["targets"] = std::move(targets);
  }
  return doc.dump() + "\n";
}

void save_dataset(const TemporalGraphDataset& dataset, const std::filesystem::path& path) {
  const std::string text = dump_dataset(dataset);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write dataset file '" + path.string() + "'");
  out << text;
  if (!out) throw ValidationError("failed writing dataset file '" + path.string() + "'");
}

// ---- synthetic data ----

namespace {

constexpr double kCoupling = 0.9;
constexpr double kWeightSharpness = 32.0;
constexpr std::size_t kBurnIn = 50;

double standard_normal(std::mt19937_64& rng) {
  // Box-Muller on 53-bit uniforms; avoids implementation-defined distributions.
  const double u1 = 1.0 - uniform01(rng);  // (0, 1]
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

}  // namespace

TemporalGraphDataset generate_synthetic(const SyntheticConfig& config) {
  if (config.num_nodes < 2) throw ContractError("synthetic dataset needs at least 2 nodes");
  if (config.lags == 0) throw ContractError("lags must be at least 1");
  if (config.num_steps < config.lags + 2) {
    throw ContractError("num_steps must be at least lags + 2 to give two snapshots");
  }
  if (!(config.edge_density > 0.0 && config.edge_density <= 1.0)) {
    throw ContractError("edge_density must lie in (0, 1]");
  }

  std::mt19937_64 rng(config.seed);
  const std::size_t n = config.num_nodes;

  std::vector<Edge> edges;
  std::vector<double> weights;
  for (std::size_t dst = 0; dst < n; ++dst) {
    for (std::size_t src = 0; src < n; ++src) {
      if (src == dst) continue;
      const double keep = uniform01(rng);
      const double w = 0.1 + 0.9 * uniform01(rng);
      if (keep < config.edge_density) {
        edges.push_back({src, dst});
        weights.push_back(w);
      }
    }
  }

  // Mixing matrix: node i follows its in-neighbors with shares ~ w^sharpness.
  std::vector<std::vector<std::pair<std::size_t, double>>> parents(n);
  for (std::size_t e = 0; e < edges.size(); ++e) {
    parents[edges[e].dst].emplace_back(edges[e].src, std::pow(weights[e], kWeightSharpness));
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (parents[i].empty()) {
      parents[i].emplace_back(i, 1.0);
      continue;
    }
    double total = 0.0;
    for (const auto& [_, s] : parents[i]) total += s;
    for (auto& [_, s] : parents[i]) s /= total;
  }

  const double noise = std::sqrt(1.0 - kCoupling * kCoupling);
  std::vector<double> state(n);
  for (auto& v : state) v = standard_normal(rng);
  Series series;
  series.reserve(config.num_steps);
  for (std::size_t step = 0; step < kBurnIn + config.num_steps; ++step) {
    std::vector<double> next(n);
    for (std::size_t i = 0; i < n; ++i) {
      double mix = 0.0;
      for (const auto& [j, s] : parents[i]) mix += s * state[j];
      next[i] = kCoupling * mix + noise * standard_normal(rng);
    }
    state = std::move(next);
    if (step >= kBurnIn) series.push_back(state);
  }

  TemporalGraphDataset ds;
  ds.name = config.name;
  ds.temporal = TemporalNature::kStatic;
  ds.num_nodes = n;
  ds.lags = config.lags;
  ds.snapshots = build_lagged_snapshots(series, config.lags, edges, weights);
  ds.series = std::move(series);
  ds.validate();
  return ds;
}

Split temporal_split(const std::vector<GraphSnapshot>& snapshots, double train_ratio) {
  if (!(train_ratio > 0.0 && train_ratio < 1.0)) {
    throw ContractError("train ratio must lie in (0, 1)");
  }
  const auto cut = static_cast<std::size_t>(std::floor(train_ratio * static_cast<double>(snapshots.size())));
  if (cut == 0 || cut >= snapshots.size()) {
    throw ContractError("split of " + std::to_string(snapshots.size()) + " snapshots at ratio " +
                        std::to_string(train_ratio) + " leaves an empty side");
  }
  Split split;
  split.train.assign(snapshots.begin(), snapshots.begin() + static_cast<std::ptrdiff_t>(cut));
  split.test.assign(snapshots.begin() + static_cast<std::ptrdiff_t>(cut), snapshots.end());
  return split;
}

}  // namespace tkgat
