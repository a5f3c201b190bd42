#pragma once

// Fast invariant suite behind `mppi selftest`. Stops at the first failure.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "mppi/cost.hpp"
#include "mppi/pipeline.hpp"
#include "mppi/prng.hpp"
#include "mppi/solver.hpp"

namespace mppi {

struct PropertyResult {
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

namespace selftest {

// Recursive padded pairwise sum, written independently of tree_reduce:
// split the zero-padded power-of-two range in halves.
inline double padded_pairwise(std::span<const double> values, std::size_t lo, std::size_t width) {
  if (width == 1) return lo < values.size() ? values[lo] : 0.0;
  const std::size_t half = width / 2;
  return padded_pairwise(values, lo, half) + padded_pairwise(values, lo + half, half);
}

inline double padded_pairwise(std::span<const double> values) {
  std::size_t width = 1;
  while (width < values.size()) width *= 2;
  return padded_pairwise(values, 0, width);
}

inline std::optional<std::string> prng_moments() {
  XorShift32 gen(12345);
  const std::size_t n = 100000;
  double s[2] = {0, 0}, ss[2] = {0, 0};
  for (std::size_t i = 0; i < n; ++i) {
    const double u1 = to_open_unit(gen());
    const double u2 = to_unit(gen());
    const auto g = box_muller(u1, u2);
    s[0] += g.steer;
    s[1] += g.accel;
    ss[0] += g.steer * g.steer;
    ss[1] += g.accel * g.accel;
  }
  for (int c = 0; c < 2; ++c) {
    const double m = s[c] / n;
    const double var = ss[c] / n - m * m;
    // 5 sigma bands at n = 1e5.
    if (std::abs(m) > 0.016 || std::abs(var - 1.0) > 0.023) {
      return "channel " + std::to_string(c) + " mean " + std::to_string(m) + " var " + std::to_string(var);
    }
  }
  if (XorShift32(1)() != 270369u) return "xorshift32 seed 1 first output";
  return std::nullopt;
}

inline std::optional<std::string> weight_simplex() {
  XorShift32 gen(99);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t K = 1 + gen() % 1024;
    const double lambda = std::pow(10.0, -3.0 + 6.0 * to_unit(gen()));
    CostVector costs;
    for (std::size_t k = 0; k < K; ++k) costs.costs.push_back(1e6 * to_unit(gen()));
    const auto w = compute_weights(costs, lambda);
    double total = 0.0;
    for (double a : w.alphas) {
      if (!(a >= 0.0 && a <= 1.0)) return "weight outside [0, 1]";
      total += a;
    }
    if (std::abs(total - 1.0) > 1e-9) return "weights sum to " + std::to_string(total);
  }
  return std::nullopt;
}

inline std::optional<std::string> pipeline_determinism() {
  const std::size_t K = 64, N = 16;
  NoiseConfig nc;
  nc.trajectories = K;
  nc.horizon = N;
  nc.lanes = 8;
  nc.master_seed = 2024;
  const NoiseBank bank = generate_noise_bank(nc);
  std::vector<VehicleState> ref;
  for (std::size_t t = 0; t <= N; ++t) ref.push_back({0.1 * t, 0.05 * t, 0.1, 4.0});
  const ControlSequence nominal(N, ControlInput{0.02, 0.5});
  const VehicleState x0{0.0, 0.2, 0.0, 3.0};
  const auto expected = run_sequential_reference(x0, ref, nominal, bank, CostWeights{}, ModelParams{});
  for (std::size_t P : {1u, 2u, 4u, 8u, 16u}) {
    for (std::size_t depth : {1u, 4u, 64u}) {
      const auto run = run_pipeline(x0, ref, nominal, bank, {P, depth, kStageOrder}, CostWeights{}, ModelParams{});
      if (run.costs != expected) {
        return "pipeline differs from sequential at P=" + std::to_string(P) + " depth=" + std::to_string(depth);
      }
    }
  }
  return std::nullopt;
}

inline std::optional<std::string> tree_reduce_determinism() {
  XorShift32 gen(7);
  std::vector<double> values;
  std::vector<double> scratch;
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 1 + gen() % 4096;
    values.resize(n);
    for (double& v : values) v = (to_unit(gen()) - 0.5) * std::pow(10.0, static_cast<int>(gen() % 9) - 4);
    const double got = tree_reduce(values, scratch);
    if (got != tree_reduce(values, scratch)) return "repeat differs at length " + std::to_string(n);
    if (got != padded_pairwise(values)) return "association order differs from oracle at length " + std::to_string(n);
  }
  return std::nullopt;
}

}  // namespace selftest

inline std::vector<std::pair<std::string, std::function<std::optional<std::string>()>>> selftest_properties() {
  return {
      {"prng-moments", selftest::prng_moments},
      {"weight-simplex", selftest::weight_simplex},
      {"pipeline-determinism", selftest::pipeline_determinism},
      {"tree-reduce-determinism", selftest::tree_reduce_determinism},
  };
}

/// Runs properties in order until one fails; the last entry is the failure
/// if any.
inline std::vector<PropertyResult> run_selftest() {
  std::vector<PropertyResult> results;
  for (const auto& [name, check] : selftest_properties()) {
    PropertyResult r{name, false, {}, 0.0};
    const auto started = std::chrono::steady_clock::now();
    try {
      const auto failure = check();
      r.passed = !failure.has_value();
      if (failure) r.detail = *failure;
    } catch (const std::exception& e) {
      r.detail = e.what();
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    results.push_back(r);
    if (!r.passed) break;
  }
  return results;
}

}  // namespace mppi
