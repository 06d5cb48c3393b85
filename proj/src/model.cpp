#include "tkgat/model.hpp"

#include <cmath>

#include "tkgat/errors.hpp"

namespace tkgat {

std::string_view variant_name(Variant v) {
  return v == Variant::kTempoKGAT ? "tempokgat" : "gat";
}

Variant parse_variant(std::string_view name) {
  if (name == "tempokgat") return Variant::kTempoKGAT;
  if (name == "gat") return Variant::kGAT;
  throw ContractError("unknown model variant '" + std::string(name) + "' (expected tempokgat or gat)");
}

void TempoKGATParams::validate() const {
  if (W.rank() != 2 || W.dim(0) == 0 || W.dim(1) == 0) {
    throw DimensionError("W must be a non-empty [F' x F] matrix, got " + shape_to_string(W.shape()));
  }
  if (a.rank() != 1 || a.dim(0) != 2 * W.dim(0)) {
    throw DimensionError("attention vector a must have shape [" + std::to_string(2 * W.dim(0)) +
                         "], got " + shape_to_string(a.shape()));
  }
  if (!std::isfinite(lambda_decay) || lambda_decay < 0.0) {
    throw ContractError("decay rate lambda must be finite and >= 0");
  }
  if (k == 0) throw ContractError("k must be at least 1");
  if (!(leaky_slope > 0.0 && leaky_slope < 1.0)) {
    throw ContractError("leaky slope must lie in (0, 1)");
  }
}

std::vector<Tensor*> ModelParams::trainable() {
  return {&layer.W, &layer.a, &head.W_out, &head.b_out};
}

std::vector<const Tensor*> ModelParams::trainable() const {
  return {&layer.W, &layer.a, &head.W_out, &head.b_out};
}

double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

namespace {

Tensor glorot(Shape shape, std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Tensor t = Tensor::zeros(std::move(shape));
  for (auto& v : t.values()) v = (2.0 * uniform01(rng) - 1.0) * limit;
  return t;
}

}  // namespace

ModelParams init_params(std::size_t in_features, std::size_t hidden, std::mt19937_64& rng,
                        double lambda_decay, std::size_t k, double leaky_slope) {
  if (in_features == 0 || hidden == 0) throw ContractError("feature and hidden widths must be >= 1");
  ModelParams p;
  p.layer.W = glorot({hidden, in_features}, in_features, hidden, rng);
  p.layer.a = glorot({2 * hidden}, 2 * hidden, 1, rng);
  p.layer.lambda_decay = lambda_decay;
  p.layer.k = k;
  p.layer.leaky_slope = leaky_slope;
  p.head.W_out = glorot({1, hidden}, hidden, 1, rng);
  p.head.b_out = Tensor::scalar(0.0);
  p.layer.validate();
  return p;
}

DecayVector DecayVector::make(std::size_t num_features, double lambda_decay) {
  if (!std::isfinite(lambda_decay) || lambda_decay < 0.0) {
    throw ContractError("decay rate lambda must be finite and >= 0");
  }
  DecayVector d;
  d.offsets.resize(num_features);
  d.factors.resize(num_features);
  for (std::size_t f = 0; f < num_features; ++f) {
    d.offsets[f] = static_cast<double>(num_features - 1 - f);
    d.factors[f] = std::exp(-lambda_decay * d.offsets[f]);
  }
  return d;
}

ModelVars register_params(Tape& tape, const ModelParams& params) {
  return {{tape.leaf(params.layer.W), tape.leaf(params.layer.a)},
          {tape.leaf(params.head.W_out), tape.leaf(params.head.b_out)}};
}

Var apply_time_decay(Var features, const DecayVector& decay) {
  const Tensor& x = features.value();
  if (x.rank() != 2 || x.dim(1) != decay.factors.size()) {
    throw DimensionError("time decay of length " + std::to_string(decay.factors.size()) +
                         " does not fit features " + shape_to_string(x.shape()));
  }
  Var d = features.tape().constant(Tensor::vector(decay.factors));
  return hadamard(features, d);
}

Transformed transform_nodes(Var decayed, Var W) {
  Transformed z;
  z.matrix = matmul(decayed, transpose(W));
  const std::size_t n = z.matrix.value().dim(0);
  z.rows.reserve(n);
  for (std::size_t i = 0; i < n; ++i) z.rows.push_back(row(z.matrix, i));
  return z;
}

Attention attention_coefficients(std::size_t node, std::span<const Neighbor> selected,
                                 const Transformed& z, Var a, double leaky_slope) {
  if (selected.empty()) {
    throw ContractError("attention_coefficients: node " + std::to_string(node) +
                        " has no selected neighbors");
  }
  std::vector<Var> scores;
  scores.reserve(selected.size());
  for (const auto& nb : selected) {
    scores.push_back(reduce_sum(hadamard(a, concat_pair(z.rows.at(node), z.rows.at(nb.node)))));
  }
  Var e = leaky_relu(stack(scores), leaky_slope);
  return {softmax_vec(e), e};
}

Var aggregate_node(std::span<const Neighbor> selected, Var alpha, const Transformed& z,
                   bool use_edge_weights) {
  Tape& tape = z.matrix.tape();
  const std::size_t hidden = z.matrix.value().dim(1);
  if (selected.empty()) return tape.constant(Tensor::zeros({hidden}));
  if (alpha.value().rank() != 1 || alpha.value().size() != selected.size()) {
    throw DimensionError("aggregate_node: alpha " + shape_to_string(alpha.shape()) + " for " +
                         std::to_string(selected.size()) + " neighbors");
  }

  std::vector<Var> neighbor_rows;
  neighbor_rows.reserve(selected.size());
  for (const auto& nb : selected) neighbor_rows.push_back(z.rows.at(nb.node));
  Var stacked = stack(neighbor_rows);

  Var beta = alpha;
  if (use_edge_weights) {
    std::vector<double> w;
    w.reserve(selected.size());
    for (const auto& nb : selected) w.push_back(nb.weight);
    beta = hadamard(alpha, tape.constant(Tensor::vector(std::move(w))));
  }
  Var out = matmul(reshape(beta, {1, selected.size()}), stacked);
  return reshape(out, {hidden});
}

namespace {

void check_inputs(const GraphSnapshot& snapshot, const NeighborIndex& index,
                  const TempoKGATParams& params) {
  params.validate();
  if (snapshot.num_features() != params.in_features()) {
    throw DimensionError("snapshot has " + std::to_string(snapshot.num_features()) +
                         " features, layer expects " + std::to_string(params.in_features()));
  }
  if (index.num_nodes() != snapshot.num_nodes()) {
    throw DimensionError("neighbor index covers " + std::to_string(index.num_nodes()) +
                         " nodes, snapshot has " + std::to_string(snapshot.num_nodes()));
  }
}

}  // namespace

Var tempokgat_forward(Tape& tape, const GraphSnapshot& snapshot, const NeighborIndex& index,
                      const TempoKGATParams& params, const LayerVars& vars) {
  check_inputs(snapshot, index, params);
  const auto decay = DecayVector::make(snapshot.num_features(), params.lambda_decay);
  Var decayed = apply_time_decay(tape.constant(snapshot.features()), decay);
  const Transformed z = transform_nodes(decayed, vars.W);

  std::vector<Var> out;
  out.reserve(snapshot.num_nodes());
  for (std::size_t i = 0; i < snapshot.num_nodes(); ++i) {
    const auto selected = select_top_k_neighbors(i, index, params.k);
    if (selected.empty()) {
      out.push_back(aggregate_node(selected, Var{}, z, true));
      continue;
    }
    const Attention att = attention_coefficients(i, selected, z, vars.a, params.leaky_slope);
    out.push_back(aggregate_node(selected, att.alpha, z, true));
  }
  return stack(out);
}

Var gat_forward(Tape& tape, const GraphSnapshot& snapshot, const NeighborIndex& index,
                const TempoKGATParams& params, const LayerVars& vars) {
  check_inputs(snapshot, index, params);
  const Transformed z = transform_nodes(tape.constant(snapshot.features()), vars.W);

  std::vector<Var> out;
  out.reserve(snapshot.num_nodes());
  for (std::size_t i = 0; i < snapshot.num_nodes(); ++i) {
    const auto neighbors = index.neighbors(i);
    if (neighbors.empty()) {
      out.push_back(aggregate_node(neighbors, Var{}, z, false));
      continue;
    }
    const Attention att = attention_coefficients(i, neighbors, z, vars.a, params.leaky_slope);
    out.push_back(aggregate_node(neighbors, att.alpha, z, false));
  }
  return stack(out);
}

Var head_forward(Var hidden, const HeadVars& head) {
  const Tensor& h = hidden.value();
  const Tensor& w = head.W_out.value();
  if (h.rank() != 2 || w.rank() != 2 || w.dim(0) != 1 || w.dim(1) != h.dim(1)) {
    throw DimensionError("head W_out " + shape_to_string(w.shape()) + " does not fit hidden " +
                         shape_to_string(h.shape()));
  }
  if (head.b_out.value().rank() != 0) {
    throw DimensionError("head bias must be a scalar, got " + shape_to_string(head.b_out.shape()));
  }
  Var projected = matmul(relu(hidden), transpose(head.W_out));
  return add(reshape(projected, {h.dim(0)}), head.b_out);
}

Var model_forward(Tape& tape, const GraphSnapshot& snapshot, const NeighborIndex& index,
                  const ModelParams& params, const ModelVars& vars, Variant variant) {
  Var h = variant == Variant::kTempoKGAT
              ? tempokgat_forward(tape, snapshot, index, params.layer, vars.layer)
              : gat_forward(tape, snapshot, index, params.layer, vars.layer);
  return head_forward(h, vars.head);
}

Tensor layer_output(const GraphSnapshot& snapshot, const TempoKGATParams& params, Variant variant) {
  Tape tape;
  const NeighborIndex index(snapshot);
  LayerVars vars{tape.leaf(params.W), tape.leaf(params.a)};
  Var h = variant == Variant::kTempoKGAT ? tempokgat_forward(tape, snapshot, index, params, vars)
                                         : gat_forward(tape, snapshot, index, params, vars);
  return h.value();
}

std::vector<double> predict(const GraphSnapshot& snapshot, const ModelParams& params, Variant variant) {
  Tape tape;
  const NeighborIndex index(snapshot);
  const ModelVars vars = register_params(tape, params);
  const Tensor& y = model_forward(tape, snapshot, index, params, vars, variant).value();
  return {y.values().begin(), y.values().end()};
}

}  // namespace tkgat
