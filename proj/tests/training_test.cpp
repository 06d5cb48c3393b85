#include "tkgat/training.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "oracles.hpp"
#include "tkgat/errors.hpp"

using namespace tkgat;

namespace {

TrainConfig quick_config(std::size_t epochs = 5) {
  TrainConfig c;
  c.hidden = 8;
  c.epochs = epochs;
  return c;
}

TemporalGraphDataset small_synthetic(std::uint64_t seed = 1) {
  SyntheticConfig c;
  c.num_nodes = 6;
  c.num_steps = 14;
  c.lags = 3;
  c.seed = seed;
  return generate_synthetic(c);
}

/// Synthetic topology whose series sits at `level` forever.
TemporalGraphDataset constant_dataset(double level) {
  auto ds = generate_synthetic({});
  const Series flat(30, std::vector<double>(ds.num_nodes, level));
  const auto& s0 = ds.snapshots.front();
  ds.snapshots = build_lagged_snapshots(flat, ds.lags, {s0.edges().begin(), s0.edges().end()},
                                        {s0.weights().begin(), s0.weights().end()});
  ds.series = flat;
  return ds;
}

}  // namespace

// ---- metrics ----

TEST(Metrics, Examples) {
  const std::vector<double> t{1, 2, 3}, p{2, 2, 5};
  const auto m = compute_metrics(t, p);
  EXPECT_DOUBLE_EQ(m.mae, 1.0);
  EXPECT_DOUBLE_EQ(m.mse, 5.0 / 3.0);
  EXPECT_DOUBLE_EQ(m.rmse, std::sqrt(5.0 / 3.0));
  EXPECT_EQ(m.n, 3u);

  const std::vector<double> zeros{0, 0}, pm{1, -1};
  const auto u = compute_metrics(zeros, pm);
  EXPECT_EQ(u.mae, 1.0);
  EXPECT_EQ(u.mse, 1.0);
  EXPECT_EQ(u.rmse, 1.0);

  const auto exact = compute_metrics(t, t);
  EXPECT_EQ(exact.mae, 0.0);
  EXPECT_EQ(exact.rmse, 0.0);
}

TEST(Metrics, RmseIsRootOfMse) {
  const std::vector<double> zero{0.0};
  for (double mse : {1.1717, 1.0017, 1.5636}) {
    const std::vector<double> p{std::sqrt(mse)};
    EXPECT_NEAR(compute_metrics(zero, p).mse, mse, 1e-12);
  }
  EXPECT_NEAR(compute_metrics(zero, std::vector<double>{std::sqrt(1.1717)}).rmse, 1.0825, 5e-4);
}

TEST(Metrics, Errors) {
  EXPECT_THROW(compute_metrics(std::vector<double>{}, std::vector<double>{}), ContractError);
  EXPECT_THROW(compute_metrics(std::vector<double>{1}, std::vector<double>{1, 2}), DimensionError);
}

TEST(MetricsProperty, PermutationInvariant) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> t(20), p(20);
    for (std::size_t i = 0; i < 20; ++i) {
      t[i] = oracle::uniform(rng, -3, 3);
      p[i] = oracle::uniform(rng, -3, 3);
    }
    const auto a = compute_metrics(t, p);
    std::vector<std::size_t> perm(20);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<double> tp, pp;
    for (auto i : perm) {
      tp.push_back(t[i]);
      pp.push_back(p[i]);
    }
    const auto b = compute_metrics(tp, pp);
    EXPECT_NEAR(a.mae, b.mae, 1e-12);
    EXPECT_NEAR(a.mse, b.mse, 1e-12);
    EXPECT_EQ(a.rmse, std::sqrt(a.mse));
  }
}

TEST(RelativeImprovement, Examples) {
  EXPECT_NEAR(relative_improvement(1.0948, 0.7476), 31.71, 0.01);
  EXPECT_NEAR(relative_improvement(1.8247, 1.1717), 35.79, 0.02);
  EXPECT_EQ(relative_improvement(2.5, 2.5), 0.0);
  EXPECT_THROW(relative_improvement(0.0, 1.0), ContractError);
}

// ---- loss ----

TEST(MseLoss, Examples) {
  Tape tape;
  Var t = tape.leaf(Tensor::vector({1, 2, 3}));
  Var same = tape.leaf(Tensor::vector({1, 2, 3}));
  Var loss = mse_loss(t, same);
  EXPECT_EQ(loss.value().item(), 0.0);
  tape.backward(loss);
  EXPECT_EQ(tape.grad(same), Tensor::zeros({3}));

  Tape t2;
  EXPECT_EQ(mse_loss(t2.constant(Tensor::vector({1, 2})), t2.constant(Tensor::vector({2, 3}))).value().item(), 1.0);
  EXPECT_THROW(mse_loss(t2.constant(Tensor::vector({1})), t2.constant(Tensor::vector({1, 2}))), DimensionError);
}

TEST(MseLoss, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(6);
  const auto r = grad_check([](Tape&, std::span<const Var> p) { return mse_loss(p[0], p[1]); },
                            {oracle::random_tensor(rng, {7}), oracle::random_tensor(rng, {7})}, 1e-6);
  EXPECT_LT(r.max_relative_error, 1e-7);
}

// ---- Adam ----

TEST(Adam, FirstStepMovesByLearningRate) {
  Tensor theta = Tensor::scalar(0.0);
  std::vector<Tensor*> params{&theta};
  AdamState state({}, params);
  adam_step(params, std::vector<Tensor>{Tensor::scalar(1.0)}, state);
  EXPECT_NEAR(theta.item(), -0.001, 1e-8);
  EXPECT_EQ(state.step(), 1u);
}

TEST(Adam, ZeroGradientLeavesParameter) {
  Tensor theta = Tensor::vector({0.3, -0.2});
  std::vector<Tensor*> params{&theta};
  AdamState state({}, params);
  adam_step(params, std::vector<Tensor>{Tensor::zeros({2})}, state);
  EXPECT_EQ(theta, Tensor::vector({0.3, -0.2}));
}

TEST(Adam, ZeroLearningRateStillUpdatesMoments) {
  Tensor theta = Tensor::vector({1.0});
  std::vector<Tensor*> params{&theta};
  AdamState state({.lr = 0.0}, params);
  adam_step(params, std::vector<Tensor>{Tensor::vector({2.0})}, state);
  EXPECT_EQ(theta[0], 1.0);
  EXPECT_EQ(state.step(), 1u);
  EXPECT_NEAR(state.first_moment()[0][0], 0.2, 1e-15);
  EXPECT_NEAR(state.second_moment()[0][0], 0.004, 1e-15);
}

TEST(Adam, IdenticalProblemsIdenticalTrajectories) {
  Tensor a = Tensor::scalar(0.5), b = Tensor::scalar(0.5);
  std::vector<Tensor*> pa{&a}, pb{&b};
  AdamState sa({}, pa), sb({}, pb);
  for (int i = 0; i < 50; ++i) {
    adam_step(pa, std::vector<Tensor>{Tensor::scalar(2 * a.item())}, sa);
    adam_step(pb, std::vector<Tensor>{Tensor::scalar(2 * b.item())}, sb);
    ASSERT_EQ(a, b);
  }
}

TEST(Adam, NonFiniteGradientAbortsWithoutMutation) {
  Tensor theta = Tensor::vector({1.0, 2.0});
  std::vector<Tensor*> params{&theta};
  AdamState state({}, params);
  EXPECT_THROW(adam_step(params, std::vector<Tensor>{Tensor::vector({0.1, NAN})}, state), NumericError);
  EXPECT_EQ(theta, Tensor::vector({1.0, 2.0}));
  EXPECT_EQ(state.step(), 0u);
}

// ---- training ----

TEST(Train, OneEpochOneRecord) {
  const auto result = train(small_synthetic(), quick_config(1));
  ASSERT_EQ(result.epochs.size(), 1u);
  EXPECT_EQ(result.epochs[0].epoch, 1u);
  EXPECT_TRUE(std::isfinite(result.epochs[0].train_loss));
}

TEST(Train, DeterministicForSeed) {
  const auto ds = small_synthetic();
  for (Variant v : {Variant::kTempoKGAT, Variant::kGAT}) {
    auto cfg = quick_config(10);
    cfg.variant = v;
    cfg.k = 2;
    const auto a = train(ds, cfg);
    const auto b = train(ds, cfg);
    EXPECT_EQ(a.epochs, b.epochs);
    EXPECT_EQ(a.params.layer.W, b.params.layer.W);
    EXPECT_EQ(a.params.layer.a, b.params.layer.a);
    EXPECT_EQ(a.params.head.W_out, b.params.head.W_out);
    EXPECT_EQ(a.params.head.b_out, b.params.head.b_out);
  }
}

TEST(Train, LossIsFiniteAndDecreases) {
  auto cfg = quick_config(60);
  cfg.lr = 0.01;
  const auto result = train(small_synthetic(2), cfg);
  for (const auto& e : result.epochs) EXPECT_TRUE(std::isfinite(e.train_loss));
  EXPECT_LT(result.epochs.back().train_loss, result.epochs.front().train_loss);
}

TEST(Train, ConstantTargetConverges) {
  TrainConfig cfg;  // hidden 32, 200 epochs, lr 0.001
  const auto result = train(constant_dataset(0.5), cfg);
  EXPECT_LT(result.epochs.back().train_loss, 0.01);
}

TEST(Train, ConfigErrors) {
  const auto ds = small_synthetic();
  auto cfg = quick_config();
  cfg.epochs = 0;
  EXPECT_THROW(train(ds, cfg), ContractError);
  cfg = quick_config();
  cfg.k = 0;
  EXPECT_THROW(train(ds, cfg), ContractError);
  cfg = quick_config();
  cfg.train_ratio = 1.0;
  EXPECT_THROW(train(ds, cfg), ContractError);
  EXPECT_THROW(train(std::span<const GraphSnapshot>{}, quick_config()), ContractError);
}

// ---- evaluation ----

TEST(Evaluate, ExactPredictionGivesZeroMetrics) {
  std::mt19937_64 rng(10);
  auto s = oracle::random_snapshot(rng, 4, 2);
  std::mt19937_64 init(1);
  const auto params = init_params(2, 4, init);
  const auto y = predict(s, params, Variant::kTempoKGAT);
  const GraphSnapshot exact(4, {s.edges().begin(), s.edges().end()}, {s.weights().begin(), s.weights().end()},
                            s.features(), y);
  const auto m = evaluate(params, std::vector<GraphSnapshot>{exact}, Variant::kTempoKGAT);
  EXPECT_EQ(m.mae, 0.0);
  EXPECT_EQ(m.mse, 0.0);
}

TEST(Evaluate, SingleNodeSingleSnapshot) {
  std::mt19937_64 init(2);
  const auto params = init_params(1, 3, init);
  const GraphSnapshot s(1, {}, {}, Tensor::matrix({{0.4}}), {2.0});
  const auto m = evaluate(params, std::vector<GraphSnapshot>{s}, Variant::kTempoKGAT);
  // No neighbors: the prediction is the zero bias.
  EXPECT_EQ(m.mae, 2.0);
  EXPECT_EQ(m.mse, 4.0);
  EXPECT_EQ(m.n, 1u);
}

TEST(Evaluate, PoolsAcrossSnapshots) {
  const auto ds = small_synthetic(3);
  std::mt19937_64 init(3);
  const auto params = init_params(ds.lags, 5, init, 0.1, 2);
  std::vector<double> truth, pred;
  for (const auto& s : ds.snapshots) {
    const auto y = predict(s, params, Variant::kTempoKGAT);
    truth.insert(truth.end(), s.targets().begin(), s.targets().end());
    pred.insert(pred.end(), y.begin(), y.end());
  }
  EXPECT_EQ(evaluate(params, ds.snapshots, Variant::kTempoKGAT), compute_metrics(truth, pred));
  EXPECT_THROW(evaluate(params, {}, Variant::kTempoKGAT), ContractError);
}

// ---- k sweep ----

TEST(Sweep, DefaultRangeFollowsAverageDegree) {
  // Complete digraph on 11 nodes including self-loops: 121 edges, avg 11.
  std::vector<Edge> edges;
  for (std::size_t i = 0; i < 11; ++i)
    for (std::size_t j = 0; j < 11; ++j) edges.push_back({j, i});
  TemporalGraphDataset ds;
  ds.num_nodes = 11;
  ds.lags = 2;
  ds.snapshots = build_lagged_snapshots(Series(6, std::vector<double>(11, 1.0)), 2, edges,
                                        std::vector<double>(121, 1.0));
  const auto ks = default_k_range(ds);
  ASSERT_EQ(ks.size(), 11u);
  EXPECT_EQ(ks.front(), 1u);
  EXPECT_EQ(ks.back(), 11u);

  TemporalGraphDataset empty = ds;
  empty.snapshots = build_lagged_snapshots(Series(6, std::vector<double>(11, 1.0)), 2, {}, {});
  EXPECT_EQ(default_k_range(empty), (std::vector<std::size_t>{1}));
}

TEST(Sweep, SingleK) {
  const auto records = sweep_k(small_synthetic(), quick_config(3), std::vector<std::size_t>{1});
  ASSERT_EQ(records.size(), 1u);
  EXPECT_EQ(records[0].k, 1u);
  ASSERT_TRUE(records[0].metrics.has_value());
  EXPECT_TRUE(records[0].error.empty());
}

TEST(Sweep, PreservesOrderAndMatchesAcrossThreads) {
  const auto ds = small_synthetic(4);
  const std::vector<std::size_t> ks{3, 1, 2};
  const auto seq = sweep_k(ds, quick_config(4), ks, 1);
  const auto par = sweep_k(ds, quick_config(4), ks, 3);
  ASSERT_EQ(seq.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(seq[i].k, ks[i]);
    EXPECT_EQ(par[i].k, ks[i]);
    EXPECT_EQ(seq[i].metrics, par[i].metrics);
  }
}

TEST(Sweep, EachKMatchesStandaloneTraining) {
  const auto ds = small_synthetic(5);
  const auto records = sweep_k(ds, quick_config(4), std::vector<std::size_t>{2});
  auto cfg = quick_config(4);
  cfg.k = 2;
  const auto split = temporal_split(ds.snapshots, cfg.train_ratio);
  EXPECT_EQ(records[0].metrics, evaluate(train(ds, cfg).params, split.test, cfg.variant));
}

TEST(Sweep, FailuresCapturedPerK) {
  auto cfg = quick_config(2);
  cfg.lr = -1;
  const auto records = sweep_k(small_synthetic(), cfg, std::vector<std::size_t>{1, 2});
  ASSERT_EQ(records.size(), 2u);
  EXPECT_FALSE(records[1].metrics.has_value());
  EXPECT_NE(records[1].error.find("k=2"), std::string::npos);
  EXPECT_THROW(sweep_k(small_synthetic(), quick_config(), std::vector<std::size_t>{0}), ContractError);
}
