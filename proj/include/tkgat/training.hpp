#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tkgat/autodiff.hpp"
#include "tkgat/dataset.hpp"
#include "tkgat/model.hpp"

namespace tkgat {

struct Metrics {
  double mae = 0.0;
  double mse = 0.0;
  double rmse = 0.0;
  std::size_t n = 0;

  friend bool operator==(const Metrics&, const Metrics&) = default;
};

/// MAE, MSE and RMSE = sqrt(MSE) over paired entries. Throws on empty or
/// mismatched input.
Metrics compute_metrics(std::span<const double> y_true, std::span<const double> y_pred);

/// 100 * (baseline - candidate) / baseline.
double relative_improvement(double baseline, double candidate);

/// Mean squared difference as a differentiable scalar.
Var mse_loss(Var y_true, Var y_pred);

struct AdamConfig {
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class AdamState {
 public:
  AdamState() = default;
  AdamState(AdamConfig config, std::span<Tensor* const> params);

  const AdamConfig& config() const { return config_; }
  std::size_t step() const { return step_; }
  const std::vector<Tensor>& first_moment() const { return m_; }
  const std::vector<Tensor>& second_moment() const { return v_; }

 private:
  friend void adam_step(std::span<Tensor* const>, std::span<const Tensor>, AdamState&);

  AdamConfig config_;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
  std::size_t step_ = 0;
};

/// One bias-corrected Adam update. Throws NumericError, leaving params and
/// state untouched, if any gradient entry is not finite.
void adam_step(std::span<Tensor* const> params, std::span<const Tensor> grads, AdamState& state);

struct TrainConfig {
  Variant variant = Variant::kTempoKGAT;
  std::size_t k = 1;
  double lambda_decay = 0.1;
  std::size_t hidden = 32;
  std::size_t epochs = 200;
  double lr = 0.001;
  std::uint64_t seed = 42;
  double train_ratio = 0.8;
  double leaky_slope = 0.2;

  void validate() const;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  std::optional<Metrics> test;

  friend bool operator==(const EpochRecord&, const EpochRecord&) = default;
};

struct TrainResult {
  ModelParams params;
  std::vector<EpochRecord> epochs;
};

/// Full-batch training: each epoch averages the MSE over every training
/// snapshot, takes one backward pass and one Adam step. Parameters are
/// initialised from `config.seed`; nothing else is random.
TrainResult train(std::span<const GraphSnapshot> train_snapshots, const TrainConfig& config);

/// Splits `dataset` chronologically and trains on the leading part.
TrainResult train(const TemporalGraphDataset& dataset, const TrainConfig& config);

/// Metrics pooled over every (node, snapshot) pair of `test`.
Metrics evaluate(const ModelParams& params, std::span<const GraphSnapshot> test, Variant variant);

struct SweepRecord {
  std::size_t k = 0;
  std::optional<Metrics> metrics;
  std::string error;  // non-empty when this k failed
};

/// k values 1..round(average in-degree), at least {1}.
std::vector<std::size_t> default_k_range(const TemporalGraphDataset& dataset);

/// Trains and evaluates once per k (same seed for all), preserving the
/// order of `k_values`. Per-k failures are captured in the record.
std::vector<SweepRecord> sweep_k(const TemporalGraphDataset& dataset, const TrainConfig& base,
                                 std::optional<std::vector<std::size_t>> k_values = {},
                                 std::size_t max_threads = 1);

}  // namespace tkgat
