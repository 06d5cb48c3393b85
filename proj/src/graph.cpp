#include "tkgat/graph.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <unordered_set>

#include "tkgat/errors.hpp"

namespace tkgat {

GraphSnapshot::GraphSnapshot(std::size_t num_nodes, std::vector<Edge> edges,
                             std::vector<double> weights, Tensor features,
                             std::vector<double> targets)
    : num_nodes_(num_nodes),
      edges_(std::move(edges)),
      weights_(std::move(weights)),
      features_(std::move(features)),
      targets_(std::move(targets)) {
  if (num_nodes_ == 0) throw ValidationError("snapshot needs at least one node");
  if (weights_.size() != edges_.size()) {
    throw ValidationError("weights: expected " + std::to_string(edges_.size()) + " entries, got " +
                          std::to_string(weights_.size()));
  }
  std::unordered_set<std::size_t> seen;
  seen.reserve(edges_.size());
  for (std::size_t e = 0; e < edges_.size(); ++e) {
    const auto [src, dst] = edges_[e];
    if (src >= num_nodes_ || dst >= num_nodes_) {
      throw ValidationError("edges[" + std::to_string(e) + "]: node index out of range [0, " +
                            std::to_string(num_nodes_) + ")");
    }
    if (!seen.insert(src * num_nodes_ + dst).second) {
      throw ValidationError("edges[" + std::to_string(e) + "]: duplicate edge (" +
                            std::to_string(src) + ", " + std::to_string(dst) + ")");
    }
    if (!std::isfinite(weights_[e])) {
      throw ValidationError("weights[" + std::to_string(e) + "]: not finite");
    }
  }
  if (features_.rank() != 2 || features_.dim(0) != num_nodes_ || features_.dim(1) == 0) {
    throw ValidationError("features: expected shape [" + std::to_string(num_nodes_) +
                          "xF] with F >= 1, got " + shape_to_string(features_.shape()));
  }
  if (targets_.size() != num_nodes_) {
    throw ValidationError("targets: expected " + std::to_string(num_nodes_) + " entries, got " +
                          std::to_string(targets_.size()));
  }
}

NeighborIndex::NeighborIndex(const GraphSnapshot& snapshot)
    : NeighborIndex(snapshot.num_nodes(), snapshot.edges(), snapshot.weights()) {}

NeighborIndex::NeighborIndex(std::size_t num_nodes, std::span<const Edge> edges,
                             std::span<const double> weights)
    : offsets_(num_nodes + 1, 0), pairs_(edges.size()) {
  for (const auto& e : edges) ++offsets_[e.dst + 1];
  for (std::size_t i = 0; i < num_nodes; ++i) offsets_[i + 1] += offsets_[i];

  std::vector<std::size_t> cursor(offsets_.begin(), offsets_.end() - 1);
  for (std::size_t e = 0; e < edges.size(); ++e) {
    pairs_[cursor[edges[e].dst]++] = Neighbor{edges[e].src, weights[e]};
  }
  for (std::size_t i = 0; i < num_nodes; ++i) {
    std::sort(pairs_.begin() + static_cast<std::ptrdiff_t>(offsets_[i]),
              pairs_.begin() + static_cast<std::ptrdiff_t>(offsets_[i + 1]),
              [](const Neighbor& a, const Neighbor& b) {
                if (a.weight != b.weight) return a.weight > b.weight;
                return a.node < b.node;
              });
  }
}

std::span<const Neighbor> NeighborIndex::neighbors(std::size_t node) const {
  if (node >= num_nodes()) {
    throw ContractError("node " + std::to_string(node) + " out of range [0, " +
                        std::to_string(num_nodes()) + ")");
  }
  return std::span<const Neighbor>(pairs_).subspan(offsets_[node], offsets_[node + 1] - offsets_[node]);
}

std::size_t NeighborIndex::max_in_degree() const {
  std::size_t best = 0;
  for (std::size_t i = 0; i + 1 < offsets_.size(); ++i) best = std::max(best, offsets_[i + 1] - offsets_[i]);
  return best;
}

std::vector<Neighbor> select_top_k_neighbors(std::size_t node, const NeighborIndex& index,
                                             std::size_t k) {
  if (k == 0) throw ContractError("select_top_k_neighbors: k must be at least 1");
  const auto all = index.neighbors(node);
  const std::size_t take = std::min(k, all.size());
  return {all.begin(), all.begin() + static_cast<std::ptrdiff_t>(take)};
}

double average_in_degree(const GraphSnapshot& snapshot) {
  return static_cast<double>(snapshot.edges().size()) / static_cast<double>(snapshot.num_nodes());
}

}  // namespace tkgat
