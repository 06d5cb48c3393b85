// TempoKGAT layer, GAT baseline layer, and the ReLU + linear forecasting head.
//
// Forward pass for one snapshot (per destination node i):
//   X_decay = X (.) d,            d_f = exp(-lambda * (F - 1 - f))
//   z_j     = W x_decay_j         (all nodes at once: Z = X_decay W^T)
//   S       = top-k in-neighbors of i by edge weight
//   e_ij    = leaky_relu(a^T [z_i || z_j]),  j in S
//   alpha_i = softmax over S of e_i
//   h_i     = sum_j alpha_ij * w_ij * z_j
// The GAT baseline is the same pipeline with d = 1, S = all in-neighbors and
// no w_ij factor. Nodes with no in-neighbors produce h_i = 0.

#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tkgat/autodiff.hpp"
#include "tkgat/graph.hpp"

namespace tkgat {

enum class Variant { kTempoKGAT, kGAT };

std::string_view variant_name(Variant v);
/// Accepts "tempokgat" or "gat".
Variant parse_variant(std::string_view name);

struct TempoKGATParams {
  Tensor W;  // [F' x F]
  Tensor a;  // [2F']
  double lambda_decay = 0.1;
  std::size_t k = 1;
  double leaky_slope = 0.2;

  std::size_t in_features() const { return W.dim(1); }
  std::size_t hidden() const { return W.dim(0); }
  /// Throws ContractError/DimensionError when the invariants do not hold.
  void validate() const;
};

struct HeadParams {
  Tensor W_out;  // [1 x F']
  Tensor b_out;  // scalar
};

struct ModelParams {
  TempoKGATParams layer;
  HeadParams head;

  /// The learnable tensors in fixed order: W, a, W_out, b_out.
  std::vector<Tensor*> trainable();
  std::vector<const Tensor*> trainable() const;
};

/// Glorot-uniform W, a (fan 2F' -> 1) and W_out; zero bias.
ModelParams init_params(std::size_t in_features, std::size_t hidden, std::mt19937_64& rng,
                        double lambda_decay = 0.1, std::size_t k = 1, double leaky_slope = 0.2);

/// Uniform double in [0, 1) built from the top 53 bits of one draw.
double uniform01(std::mt19937_64& rng);

struct DecayVector {
  std::vector<double> offsets;  // t_f = F - 1 - f
  std::vector<double> factors;  // exp(-lambda * t_f)

  static DecayVector make(std::size_t num_features, double lambda_decay);
};

// ---- tape-level building blocks ----

struct LayerVars {
  Var W;
  Var a;
};

struct HeadVars {
  Var W_out;
  Var b_out;
};

struct ModelVars {
  LayerVars layer;
  HeadVars head;
};

ModelVars register_params(Tape& tape, const ModelParams& params);

/// Row-wise Hadamard product of X [N x F] with the decay factors.
Var apply_time_decay(Var features, const DecayVector& decay);

/// Transformed node features: the matrix Z = X_decay W^T and its rows z_i.
struct Transformed {
  Var matrix;
  std::vector<Var> rows;
};

Transformed transform_nodes(Var decayed, Var W);

struct Attention {
  Var alpha;  // [|S|], softmax of e_raw
  Var e_raw;  // [|S|]
};

/// Attention of node i over `selected`. Throws ContractError if empty.
Attention attention_coefficients(std::size_t node, std::span<const Neighbor> selected,
                                 const Transformed& z, Var a, double leaky_slope);

/// sum_j alpha_j * w_j * z_j, or sum_j alpha_j * z_j when use_edge_weights is
/// false. Empty selection yields zeros(F').
Var aggregate_node(std::span<const Neighbor> selected, Var alpha, const Transformed& z,
                   bool use_edge_weights);

/// H [N x F'].
Var tempokgat_forward(Tape& tape, const GraphSnapshot& snapshot, const NeighborIndex& index,
                      const TempoKGATParams& params, const LayerVars& vars);
Var gat_forward(Tape& tape, const GraphSnapshot& snapshot, const NeighborIndex& index,
                const TempoKGATParams& params, const LayerVars& vars);

/// y_hat [N] = relu(H) W_out^T + b_out.
Var head_forward(Var hidden, const HeadVars& head);

Var model_forward(Tape& tape, const GraphSnapshot& snapshot, const NeighborIndex& index,
                  const ModelParams& params, const ModelVars& vars, Variant variant);

// ---- value-level conveniences ----

Tensor layer_output(const GraphSnapshot& snapshot, const TempoKGATParams& params, Variant variant);
std::vector<double> predict(const GraphSnapshot& snapshot, const ModelParams& params, Variant variant);

}  // namespace tkgat
