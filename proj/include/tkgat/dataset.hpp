// Temporal graph datasets: canonical JSON schema, lag-window construction,
// a seeded synthetic generator, and the chronological train/test split.
//
// Canonical file (UTF-8 JSON, unknown top-level keys rejected):
//   name      string
//   temporal  "static" | "dynamic"
//   num_nodes integer
//   lags      integer
//   static:   edges   [[src, dst], ...]      weights   [w, ...]
//   dynamic:  edges_t [edges per snapshot]   weights_t [weights per snapshot]
//   and exactly one of
//     features [T][N][F] + targets [T][N]
//     series   [T_raw][N]   (snapshots derived with `lags`)
// In series mode of a dynamic file, edges_t has one entry per derived
// snapshot (T_raw - lags).

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "tkgat/graph.hpp"

namespace tkgat {

enum class TemporalNature { kStatic, kDynamic };

/// Row t holds every node's observation at time t: [T_raw][N].
using Series = std::vector<std::vector<double>>;

struct TemporalGraphDataset {
  std::string name;
  TemporalNature temporal = TemporalNature::kStatic;
  std::size_t num_nodes = 0;
  std::size_t lags = 0;
  std::vector<GraphSnapshot> snapshots;
  /// Raw observations when the dataset was derived from a series.
  std::optional<Series> series;

  /// Throws ValidationError describing the first broken invariant.
  void validate() const;

  friend bool operator==(const TemporalGraphDataset&, const TemporalGraphDataset&) = default;
};

/// Mean of |E_t| / N over snapshots.
double average_in_degree(const TemporalGraphDataset& dataset);

/// Sliding windows of `lags` observations (oldest first) predicting the next
/// one. Produces T_raw - lags snapshots sharing the given topology.
std::vector<GraphSnapshot> build_lagged_snapshots(const Series& series, std::size_t lags,
                                                  const std::vector<Edge>& edges,
                                                  const std::vector<double>& weights);

TemporalGraphDataset load_dataset(const std::filesystem::path& path);
TemporalGraphDataset parse_dataset(const std::string& json_text);
std::string dump_dataset(const TemporalGraphDataset& dataset);
void save_dataset(const TemporalGraphDataset& dataset, const std::filesystem::path& path);

struct SyntheticConfig {
  std::size_t num_nodes = 15;
  std::size_t num_steps = 30;  // raw observations per node
  std::size_t lags = 4;
  std::uint64_t seed = 42;
  double edge_density = 1.0;
  std::string name = "synthetic";
};

/// Static random weighted digraph (no self-loops) with a series in which
/// each node follows its in-neighbors, dominated by the strongest edge.
/// Bit-identical output for a given config.
TemporalGraphDataset generate_synthetic(const SyntheticConfig& config);

struct Split {
  std::vector<GraphSnapshot> train;
  std::vector<GraphSnapshot> test;
};

/// First floor(ratio * T) snapshots train, the rest test.
Split temporal_split(const std::vector<GraphSnapshot>& snapshots, double train_ratio);

}  // namespace tkgat
