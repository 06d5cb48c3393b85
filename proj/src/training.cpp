#include "tkgat/training.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <random>
#include <thread>

#include "tkgat/errors.hpp"

namespace tkgat {

Metrics compute_metrics(std::span<const double> y_true, std::span<const double> y_pred) {
  if (y_true.size() != y_pred.size()) {
    throw DimensionError("compute_metrics: " + std::to_string(y_true.size()) + " targets vs " +
                         std::to_string(y_pred.size()) + " predictions");
  }
  if (y_true.empty()) throw ContractError("compute_metrics: empty input");
  double abs_sum = 0.0;
  double sq_sum = 0.0;
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    const double d = y_true[i] - y_pred[i];
    abs_sum += std::abs(d);
    sq_sum += d * d;
  }
  Metrics m;
  m.n = y_true.size();
  m.mae = abs_sum / static_cast<double>(m.n);
  m.mse = sq_sum / static_cast<double>(m.n);
  m.rmse = std::sqrt(m.mse);
  return m;
}

double relative_improvement(double baseline, double candidate) {
  if (baseline == 0.0) throw ContractError("relative_improvement: baseline is zero");
  return 100.0 * (baseline - candidate) / baseline;
}

Var mse_loss(Var y_true, Var y_pred) {
  if (y_true.shape() != y_pred.shape()) {
    throw DimensionError("mse_loss: shapes " + shape_to_string(y_true.shape()) + " and " +
                         shape_to_string(y_pred.shape()));
  }
  const std::size_t n = y_pred.value().size();
  if (n == 0) throw ContractError("mse_loss: empty input");
  Var diff = sub(y_pred, y_true);
  return scale(reduce_sum(hadamard(diff, diff)), 1.0 / static_cast<double>(n));
}

// ---- Adam ----

AdamState::AdamState(AdamConfig config, std::span<Tensor* const> params) : config_(config) {
  if (!(config_.lr >= 0.0) || !std::isfinite(config_.lr)) throw ContractError("Adam lr must be finite and >= 0");
  m_.reserve(params.size());
  v_.reserve(params.size());
  for (const Tensor* p : params) {
    m_.push_back(Tensor::zeros(p->shape()));
    v_.push_back(Tensor::zeros(p->shape()));
  }
}

void adam_step(std::span<Tensor* const> params, std::span<const Tensor> grads, AdamState& state) {
  if (params.size() != grads.size() || params.size() != state.m_.size()) {
    throw DimensionError("adam_step: " + std::to_string(params.size()) + " params, " +
                         std::to_string(grads.size()) + " grads, " + std::to_string(state.m_.size()) +
                         " moment slots");
  }
  for (std::size_t p = 0; p < params.size(); ++p) {
    if (params[p]->shape() != grads[p].shape() || params[p]->shape() != state.m_[p].shape()) {
      throw DimensionError("adam_step: parameter " + std::to_string(p) + " shape " +
                           shape_to_string(params[p]->shape()) + " vs gradient " +
                           shape_to_string(grads[p].shape()));
    }
    const auto g = grads[p].values();
    for (std::size_t e = 0; e < g.size(); ++e) {
      if (!std::isfinite(g[e])) {
        throw NumericError("adam_step: non-finite gradient at parameter " + std::to_string(p) +
                           ", entry " + std::to_string(e));
      }
    }
  }

  const auto& c = state.config_;
  ++state.step_;
  const double t = static_cast<double>(state.step_);
  const double correction1 = 1.0 - std::pow(c.beta1, t);
  const double correction2 = 1.0 - std::pow(c.beta2, t);
  for (std::size_t p = 0; p < params.size(); ++p) {
    auto theta = params[p]->values();
    auto m = state.m_[p].values();
    auto v = state.v_[p].values();
    const auto g = grads[p].values();
    for (std::size_t e = 0; e < g.size(); ++e) {
      m[e] = c.beta1 * m[e] + (1.0 - c.beta1) * g[e];
      v[e] = c.beta2 * v[e] + (1.0 - c.beta2) * g[e] * g[e];
      const double m_hat = m[e] / correction1;
      const double v_hat = v[e] / correction2;
      theta[e] -= c.lr * m_hat / (std::sqrt(v_hat) + c.eps);
    }
  }
}

// ---- training loop ----

void TrainConfig::validate() const {
  if (epochs == 0) throw ContractError("epochs must be at least 1");
  if (!(lr > 0.0) || !std::isfinite(lr)) throw ContractError("learning rate must be finite and > 0");
  if (k == 0) throw ContractError("k must be at least 1");
  if (hidden == 0) throw ContractError("hidden width must be at least 1");
  if (!std::isfinite(lambda_decay) || lambda_decay < 0.0) {
    throw ContractError("lambda must be finite and >= 0");
  }
  if (!(train_ratio > 0.0 && train_ratio < 1.0)) throw ContractError("train ratio must lie in (0, 1)");
  if (!(leaky_slope > 0.0 && leaky_slope < 1.0)) throw ContractError("leaky slope must lie in (0, 1)");
}

TrainResult train(std::span<const GraphSnapshot> train_snapshots, const TrainConfig& config) {
  config.validate();
  if (train_snapshots.empty()) throw ContractError("train: no training snapshots");
  const std::size_t features = train_snapshots.front().num_features();

  std::mt19937_64 rng(config.seed);
  TrainResult result;
  result.params = init_params(features, config.hidden, rng, config.lambda_decay, config.k,
                              config.leaky_slope);

  std::vector<NeighborIndex> indices;
  indices.reserve(train_snapshots.size());
  for (const auto& s : train_snapshots) indices.emplace_back(s);

  const auto trainable = result.params.trainable();
  AdamState adam(AdamConfig{.lr = config.lr}, trainable);
  const double inv_count = 1.0 / static_cast<double>(train_snapshots.size());

  Tape tape;
  std::vector<Tensor> grads(trainable.size());
  result.epochs.reserve(config.epochs);
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    tape.reset();
    const ModelVars vars = register_params(tape, result.params);
    Var total;
    for (std::size_t s = 0; s < train_snapshots.size(); ++s) {
      const auto& snap = train_snapshots[s];
      Var y_hat = model_forward(tape, snap, indices[s], result.params, vars, config.variant);
      Var y = tape.constant(Tensor::vector({snap.targets().begin(), snap.targets().end()}));
      Var loss = mse_loss(y, y_hat);
      total = total.valid() ? add(total, loss) : loss;
    }
    Var mean_loss = scale(total, inv_count);
    const double loss_value = mean_loss.value().item();
    if (!std::isfinite(loss_value)) {
      throw NumericError("non-finite training loss at epoch " + std::to_string(epoch));
    }
    tape.backward(mean_loss);
    grads[0] = tape.grad(vars.layer.W);
    grads[1] = tape.grad(vars.layer.a);
    grads[2] = tape.grad(vars.head.W_out);
    grads[3] = tape.grad(vars.head.b_out);
    try {
      adam_step(trainable, grads, adam);
    } catch (const NumericError& e) {
      throw NumericError("epoch " + std::to_string(epoch) + ": " + e.what());
    }
    result.epochs.push_back({epoch, loss_value, std::nullopt});
  }
  return result;
}

TrainResult train(const TemporalGraphDataset& dataset, const TrainConfig& config) {
  config.validate();
  const Split split = temporal_split(dataset.snapshots, config.train_ratio);
  return train(split.train, config);
}

Metrics evaluate(const ModelParams& params, std::span<const GraphSnapshot> test, Variant variant) {
  if (test.empty()) throw ContractError("evaluate: no test snapshots");
  std::vector<double> truth;
  std::vector<double> pred;
  for (const auto& s : test) {
    const auto y_hat = predict(s, params, variant);
    truth.insert(truth.end(), s.targets().begin(), s.targets().end());
    pred.insert(pred.end(), y_hat.begin(), y_hat.end());
  }
  return compute_metrics(truth, pred);
}

// ---- k sweep ----

std::vector<std::size_t> default_k_range(const TemporalGraphDataset& dataset) {
  const auto upper = static_cast<std::size_t>(std::llround(average_in_degree(dataset)));
  std::vector<std::size_t> ks;
  for (std::size_t k = 1; k <= std::max<std::size_t>(upper, 1); ++k) ks.push_back(k);
  return ks;
}

std::vector<SweepRecord> sweep_k(const TemporalGraphDataset& dataset, const TrainConfig& base,
                                 std::optional<std::vector<std::size_t>> k_values,
                                 std::size_t max_threads) {
  const std::vector<std::size_t> ks = k_values ? *k_values : default_k_range(dataset);
  for (std::size_t k : ks) {
    if (k == 0) throw ContractError("sweep_k: every k must be at least 1");
  }
  const Split split = temporal_split(dataset.snapshots, base.train_ratio);

  std::vector<SweepRecord> records(ks.size());
  auto run_one = [&](std::size_t slot) {
    SweepRecord& rec = records[slot];
    rec.k = ks[slot];
    try {
      TrainConfig cfg = base;
      cfg.k = rec.k;
      const TrainResult trained = train(split.train, cfg);
      rec.metrics = evaluate(trained.params, split.test, cfg.variant);
    } catch (const std::exception& e) {
      rec.error = "k=" + std::to_string(rec.k) + ": " + e.what();
    }
  };

  const std::size_t workers = std::clamp<std::size_t>(max_threads, 1, std::max<std::size_t>(ks.size(), 1));
  if (workers == 1) {
    for (std::size_t i = 0; i < ks.size(); ++i) run_one(i);
    return records;
  }
  std::atomic<std::size_t> next{0};
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < ks.size(); i = next++) run_one(i);
      });
    }
  }
  return records;
}

}  // namespace tkgat
