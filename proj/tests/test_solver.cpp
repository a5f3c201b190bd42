#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "mppi/solver.hpp"
#include "micro_instance.hpp"

namespace {

using namespace mppi;

TEST(Weights, EqualCostsAreUniform) {
  const auto w = compute_weights(CostVector{{3, 3, 3, 3, 3}}, 0.7);
  for (double a : w.alphas) EXPECT_DOUBLE_EQ(a, 0.2);
}

TEST(Weights, ClosedFormTwoTrajectories) {
  const double lambda = 2.5;
  const auto w = compute_weights(CostVector{{0.0, lambda * std::log(3.0)}}, lambda);
  EXPECT_NEAR(w[0], 0.75, 1e-15);
  EXPECT_NEAR(w[1], 0.25, 1e-15);
}

TEST(Weights, ShiftInvariant) {
  const CostVector base{{1.5, 2.25, 10.0, 0.125}};
  CostVector shifted = base;
  for (auto& j : shifted.costs) j += 1024.0;
  const auto a = compute_weights(base, 0.5);
  const auto b = compute_weights(shifted, 0.5);
  for (std::size_t k = 0; k < a.size(); ++k) EXPECT_NEAR(a[k], b[k], 1e-12);
}

TEST(Weights, SimplexAndMonotoneOnRandomVectors) {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> cost(0.0, 100.0);
  std::uniform_real_distribution<double> log_lambda(-1.0, 2.0);
  for (int trial = 0; trial < 500; ++trial) {
    CostVector c;
    c.costs.resize(1 + trial % 97);
    for (auto& j : c.costs) j = cost(rng);
    const double lambda = std::pow(10.0, log_lambda(rng));
    const auto w = compute_weights(c, lambda);
    double sum = 0.0;
    for (double a : w.alphas) {
      ASSERT_GE(a, 0.0);
      ASSERT_LE(a, 1.0);
      sum += a;
    }
    ASSERT_NEAR(sum, 1.0, 1e-9);
    for (std::size_t i = 0; i + 1 < c.size(); ++i) {
      if (c[i] < c[i + 1] && w[i + 1] > 0.0) {
        ASSERT_GT(w[i], w[i + 1]);
      }
    }
  }
}

TEST(Weights, Errors) {
  EXPECT_THROW(compute_weights(CostVector{}, 1.0), Error);
  EXPECT_THROW(compute_weights(CostVector{{1.0}}, 0.0), Error);
  EXPECT_THROW(compute_weights(CostVector{{1.0, INFINITY}}, 1.0), Error);
}

NoiseBank bank_from(std::size_t K, std::size_t N, std::vector<double> steer, std::vector<double> accel) {
  NoiseBank b;
  b.trajectories = K;
  b.horizon = N;
  b.steer = std::move(steer);
  b.accel = std::move(accel);
  return b;
}

TEST(UpdateControls, ZeroNoiseLeavesNominal) {
  const ControlSequence nominal({{0.1, 1.0}, {-0.2, 0.5}, {0.0, 0.0}});
  const auto bank = bank_from(4, 3, std::vector<double>(12, 0.0), std::vector<double>(12, 0.0));
  WeightVector w{{0.1, 0.2, 0.3, 0.4}};
  EXPECT_EQ(update_controls(nominal, bank, w), nominal);
}

TEST(UpdateControls, WeightedAverageArithmetic) {
  const ControlSequence nominal({{0.0, 0.0}});
  // K = 2, N = 1: steer noise +1 on k=0, -1 on k=1.
  const auto bank = bank_from(2, 1, {1.0, -1.0}, {0.0, 0.0});
  const auto out = update_controls(nominal, bank, WeightVector{{0.75, 0.25}});
  EXPECT_DOUBLE_EQ(out[0].steer, 0.5);
  EXPECT_DOUBLE_EQ(out[0].accel, 0.0);
}

TEST(UpdateControls, SmallLambdaSelectsBestTrajectory) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g(0.0, 1.0);
  constexpr std::size_t K = 32, N = 8;
  std::vector<double> steer(K * N), accel(K * N);
  for (auto& v : steer) v = g(rng);
  for (auto& v : accel) v = g(rng);
  CostVector costs;
  for (std::size_t k = 0; k < K; ++k) costs.costs.push_back(10.0 + static_cast<double>((k * 7) % K));
  const std::size_t best = 0;  // cost 10, all others >= 11
  const auto w = compute_weights(costs, 1e-6);
  const ControlSequence zero(N, ControlInput{});
  const auto out = update_controls(zero, bank_from(K, N, steer, accel), w);
  for (std::size_t t = 0; t < N; ++t) {
    EXPECT_NEAR(out[t].steer, steer[best * N + t], 1e-6);
    EXPECT_NEAR(out[t].accel, accel[best * N + t], 1e-6);
  }
}

TEST(UpdateControls, DimensionMismatch) {
  const ControlSequence nominal(3, ControlInput{});
  const auto bank = bank_from(2, 2, std::vector<double>(4), std::vector<double>(4));
  try {
    update_controls(nominal, bank, WeightVector{{0.5, 0.5}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DimensionMismatch);
  }
}

TEST(Smoothing, Examples) {
  const ControlSequence seq({{0.0, 3.0}, {1.0, -1.0}, {1.0, 2.0}});
  EXPECT_EQ(smooth_controls(seq, 0.0), seq);
  const auto held = smooth_controls(seq, 1.0);
  for (std::size_t t = 0; t < 3; ++t) EXPECT_EQ(held[t], seq[0]);
  const auto half = smooth_controls(seq, 0.5);
  EXPECT_DOUBLE_EQ(half[0].steer, 0.0);
  EXPECT_DOUBLE_EQ(half[1].steer, 0.5);
  EXPECT_DOUBLE_EQ(half[2].steer, 0.75);
  EXPECT_THROW(smooth_controls(seq, 1.5), Error);
}

TEST(ShiftHorizon, Examples) {
  const ControlInput z{9, 9};
  EXPECT_EQ(shift_horizon(ControlSequence({{1, 1}}), z), ControlSequence({z}));
  const ControlInput a{1, 0}, b{2, 0}, c{3, 0};
  EXPECT_EQ(shift_horizon(ControlSequence({a, b, c}), z), ControlSequence({b, c, z}));
  ControlSequence seq({a, b, c, a, b});
  for (int i = 0; i < 5; ++i) seq = shift_horizon(seq, z);
  EXPECT_EQ(seq, ControlSequence(5, z));
}

// --- micro instance -------------------------------------------------------

TEST(MicroInstance, CostsWeightsAndUpdateMatchHandEvaluation) {
  using namespace micro;
  const auto bank = noise_bank();
  const auto reference = reference_states();
  const auto nominal = nominal_controls();
  const ModelParams params;
  const CostWeights weights;

  const auto costs = run_sequential_reference(kX0, reference, nominal, bank, weights, params);
  ASSERT_EQ(costs.size(), 2u);
  EXPECT_NEAR(costs[0], kCosts[0], 1e-9);
  EXPECT_NEAR(costs[1], kCosts[1], 1e-9);

  const auto alphas = compute_weights(costs, 1.0);
  EXPECT_NEAR(alphas[0], kAlphas[0], 1e-9);
  EXPECT_NEAR(alphas[1], kAlphas[1], 1e-9);

  const auto updated = update_controls(nominal, bank, alphas);
  const auto smoothed = smooth_controls(updated, 0.2);
  for (std::size_t t = 0; t < 2; ++t) {
    EXPECT_NEAR(updated[t].steer, kUpdated[t][0], 1e-9);
    EXPECT_NEAR(updated[t].accel, kUpdated[t][1], 1e-9);
    EXPECT_NEAR(smoothed[t].steer, kSmoothed[t][0], 1e-9);
    EXPECT_NEAR(smoothed[t].accel, kSmoothed[t][1], 1e-9);
  }
}

// --- full step --------------------------------------------------------------

SolverConfig small_config() {
  SolverConfig cfg;
  cfg.K = 64;
  cfg.N = 12;
  cfg.P = 4;
  cfg.queue_depth = 4;
  cfg.master_seed = 1234;
  return cfg;
}

std::vector<VehicleState> straight_reference(std::size_t N, double speed, double dt) {
  std::vector<VehicleState> ref(N + 1);
  for (std::size_t t = 0; t <= N; ++t) ref[t] = {speed * dt * t, 0.0, 0.0, speed};
  return ref;
}

TEST(Solver, ZeroNoiseReturnsSmoothedNominal) {
  auto cfg = small_config();
  cfg.sigma_u = {0.0, 0.0};
  Solver solver(cfg, CostWeights{}, ModelParams{});
  ControlSequence nominal(cfg.N, ControlInput{});
  for (std::size_t t = 0; t < cfg.N; ++t) nominal[t] = {0.01 * t, 0.1 * (t % 3)};
  const auto result = solver.step({0, 0, 0, 1}, straight_reference(cfg.N, 2, 0.02), nominal);
  EXPECT_EQ(result.controls, smooth_controls(nominal, cfg.smoothing_beta));

  cfg.smoothing_beta = 0.0;
  Solver identity(cfg, CostWeights{}, ModelParams{});
  EXPECT_EQ(identity.step({0, 0, 0, 1}, straight_reference(cfg.N, 2, 0.02), nominal).controls, nominal);
}

TEST(Solver, SingleTrajectoryTakesItsNoise) {
  auto cfg = small_config();
  cfg.K = 1;
  cfg.P = 1;
  cfg.smoothing_beta = 0.0;
  Solver solver(cfg, CostWeights{}, ModelParams{});
  const ControlSequence nominal(cfg.N, ControlInput{});
  const auto result = solver.step({0, 0, 0, 1}, straight_reference(cfg.N, 2, 0.02), nominal);
  const auto bank = generate_noise_bank(cfg);
  for (std::size_t t = 0; t < cfg.N; ++t) {
    EXPECT_EQ(result.controls[t].steer, bank.steer[t]);
    EXPECT_EQ(result.controls[t].accel, bank.accel[t]);
  }
  EXPECT_DOUBLE_EQ(result.diagnostics.ess, 1.0);
}

TEST(Solver, BitIdenticalAcrossRunsAndWorkerCounts) {
  auto cfg = small_config();
  cfg.noise_lanes = 8;
  cfg.max_iters = 2;
  const auto ref = straight_reference(cfg.N, 3, 0.02);
  const ControlSequence nominal(cfg.N, ControlInput{0.0, 0.5});

  cfg.P = 1;
  Solver sequential(cfg, CostWeights{}, ModelParams{});
  const auto expected = sequential.step({0, 0.3, 0.05, 2}, ref, nominal).controls;

  for (std::size_t P : {1u, 2u, 4u, 8u}) {
    for (bool prefetch : {false, true}) {
      cfg.P = P;
      cfg.prefetch_noise = prefetch;
      Solver solver(cfg, CostWeights{}, ModelParams{});
      EXPECT_EQ(solver.step({0, 0.3, 0.05, 2}, ref, nominal).controls, expected) << "P=" << P;
    }
  }
}

TEST(Solver, SuccessiveStepsDrawFreshNoiseAndPrefetchKeepsOrder) {
  auto cfg = small_config();
  const auto ref = straight_reference(cfg.N, 3, 0.02);
  const ControlSequence nominal(cfg.N, ControlInput{});
  Solver plain(cfg, CostWeights{}, ModelParams{});
  cfg.prefetch_noise = true;
  Solver prefetching(cfg, CostWeights{}, ModelParams{});
  const auto a1 = plain.step({}, ref, nominal).controls;
  const auto a2 = plain.step({}, ref, nominal).controls;
  EXPECT_NE(a1, a2);
  EXPECT_EQ(prefetching.step({}, ref, nominal).controls, a1);
  EXPECT_EQ(prefetching.step({}, ref, nominal).controls, a2);
}

TEST(Solver, DiagnosticsAreConsistent) {
  auto cfg = small_config();
  Solver solver(cfg, CostWeights{}, ModelParams{});
  const auto r = solver.step({0, 0, 0, 0}, straight_reference(cfg.N, 6, 0.02), ControlSequence(cfg.N, ControlInput{}));
  const auto& d = r.diagnostics;
  EXPECT_GT(d.j_min, 0.0);
  EXPECT_GE(d.j_mean, d.j_min);
  EXPECT_GE(d.ess, 1.0 - 1e-12);
  EXPECT_LE(d.ess, static_cast<double>(cfg.K) + 1e-9);
  for (double ms : d.stage_ms) EXPECT_GE(ms, 0.0);
  EXPECT_EQ(d.iterations, 1u);
}

TEST(SolverConfig, Validation) {
  SolverConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  cfg.lambda = -1;
  EXPECT_THROW(cfg.validate(), Error);
  cfg = {};
  cfg.P = cfg.K + 1;
  EXPECT_THROW(cfg.validate(), Error);
  cfg = {};
  cfg.smoothing_beta = 1.1;
  EXPECT_THROW(cfg.validate(), Error);
  cfg = {};
  cfg.master_seed = 0;
  EXPECT_THROW(cfg.validate(), Error);
}

}  // namespace
