#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "tkgat/autodiff.hpp"

namespace tkgat {

/// Directed edge: `src` sends messages to `dst`.
struct Edge {
  std::size_t src = 0;
  std::size_t dst = 0;
  friend bool operator==(const Edge&, const Edge&) = default;
};

struct Neighbor {
  std::size_t node = 0;
  double weight = 0.0;
  friend bool operator==(const Neighbor&, const Neighbor&) = default;
};

/// One timestep of a temporal graph. Immutable after construction.
class GraphSnapshot {
 public:
  /// Throws ValidationError on out-of-range endpoints, duplicate edges,
  /// non-finite weights, or feature/target sizes that disagree with
  /// num_nodes. `features` must be num_nodes x F with F >= 1.
  GraphSnapshot(std::size_t num_nodes, std::vector<Edge> edges, std::vector<double> weights,
                Tensor features, std::vector<double> targets);

  std::size_t num_nodes() const { return num_nodes_; }
  std::size_t num_features() const { return features_.dim(1); }
  std::span<const Edge> edges() const { return edges_; }
  std::span<const double> weights() const { return weights_; }
  const Tensor& features() const { return features_; }
  std::span<const double> targets() const { return targets_; }

  bool same_topology(const GraphSnapshot& other) const {
    return edges_ == other.edges_ && weights_ == other.weights_;
  }

  friend bool operator==(const GraphSnapshot&, const GraphSnapshot&) = default;

 private:
  std::size_t num_nodes_;
  std::vector<Edge> edges_;
  std::vector<double> weights_;
  Tensor features_;
  std::vector<double> targets_;
};

/// Per-destination in-neighbor lists ordered by weight descending, ties by
/// ascending source index.
class NeighborIndex {
 public:
  NeighborIndex() = default;
  explicit NeighborIndex(const GraphSnapshot& snapshot);
  NeighborIndex(std::size_t num_nodes, std::span<const Edge> edges, std::span<const double> weights);

  std::size_t num_nodes() const { return offsets_.empty() ? 0 : offsets_.size() - 1; }
  std::span<const Neighbor> neighbors(std::size_t node) const;
  std::size_t max_in_degree() const;
  std::size_t total_pairs() const { return pairs_.size(); }

 private:
  std::vector<std::size_t> offsets_;  // CSR row starts, size N + 1
  std::vector<Neighbor> pairs_;
};

inline NeighborIndex build_neighbor_index(const GraphSnapshot& snapshot) {
  return NeighborIndex(snapshot);
}

/// The min(k, in-degree) strongest in-neighbors of `node`. k must be >= 1.
std::vector<Neighbor> select_top_k_neighbors(std::size_t node, const NeighborIndex& index,
                                             std::size_t k);

/// |E| / N.
double average_in_degree(const GraphSnapshot& snapshot);

}  // namespace tkgat
