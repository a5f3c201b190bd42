#pragma once

#include <array>
#include <bit>
#include <cmath>
#include <span>
#include <vector>

#include "mppi/error.hpp"
#include "mppi/model.hpp"

namespace mppi {

/// Diagonal weights. Q and Qf act on (x, y, heading, speed); R on (steer, accel).
struct CostWeights {
  std::array<double, 4> Q{20.0, 20.0, 2.0, 1.0};
  std::array<double, 2> R{1.0, 0.5};
  std::array<double, 4> Qf{100.0, 100.0, 10.0, 5.0};

  void validate() const {
    auto check = [](std::span<const double> values, const char* name) {
      for (double v : values) {
        if (!(v >= 0.0) || !std::isfinite(v)) {
          throw Error(ErrorCode::ConfigError, std::string("cost.") + name + " entries must be finite and >= 0");
        }
      }
    };
    check(Q, "Q");
    check(R, "R");
    check(Qf, "Qf");
  }

  friend bool operator==(const CostWeights&, const CostWeights&) = default;
};

struct CostVector {
  std::vector<double> costs;

  std::size_t size() const noexcept { return costs.size(); }
  double operator[](std::size_t k) const { return costs[k]; }

  friend bool operator==(const CostVector&, const CostVector&) = default;
};

/// Balanced pairwise sum over a zero-padded power-of-two buffer. The tree
/// shape depends only on the input length, so the result is reproducible
/// regardless of who calls it or how work is split. `scratch` is resized as
/// needed and may be reused across calls.
inline double tree_reduce(std::span<const double> values, std::vector<double>& scratch) {
  if (values.empty()) throw Error(ErrorCode::EmptyInput, "tree_reduce of an empty sequence");
  const std::size_t width = std::bit_ceil(values.size());
  scratch.assign(width, 0.0);
  std::copy(values.begin(), values.end(), scratch.begin());
#ifdef MPPI_MUTATION_BREAK_TREE_PADDING
  // Deliberately broken variant for the self-test mutation check: skips the
  // padding and folds an odd tail into its neighbour.
  std::size_t live = values.size();
  while (live > 1) {
    const std::size_t half = live / 2;
    for (std::size_t i = 0; i < half; ++i) scratch[i] = scratch[2 * i] + scratch[2 * i + 1];
    if (live % 2 != 0) scratch[half - 1] += scratch[live - 1];
    live = half;
  }
#else
  for (std::size_t live = width; live > 1; live /= 2) {
    for (std::size_t i = 0; i < live / 2; ++i) scratch[i] = scratch[2 * i] + scratch[2 * i + 1];
  }
#endif
  return scratch[0];
}

inline double tree_reduce(std::span<const double> values) {
  std::vector<double> scratch;
  return tree_reduce(values, scratch);
}

namespace detail {

inline double weighted_state_deviation(const VehicleState& a, const VehicleState& b,
                                       const std::array<double, 4>& w) noexcept {
  const double dx = a.x - b.x;
  const double dy = a.y - b.y;
  const double dh = wrap_angle(a.heading - b.heading);
  const double dv = a.speed - b.speed;
  return w[0] * dx * dx + w[1] * dy * dy + w[2] * dh * dh + w[3] * dv * dv;
}

}  // namespace detail

/// Tracking term on the state deviation plus effort on the commanded
/// (unsaturated) control u + w.
inline double stage_cost(const VehicleState& state, const VehicleState& ref, const ControlInput& commanded,
                         const CostWeights& weights) {
  detail::require_finite("stage_cost", state.x, state.y, state.heading, state.speed, ref.x, ref.y, ref.heading,
                         ref.speed, commanded.steer, commanded.accel);
  return detail::weighted_state_deviation(state, ref, weights.Q) + weights.R[0] * commanded.steer * commanded.steer +
         weights.R[1] * commanded.accel * commanded.accel;
}

inline double terminal_cost(const VehicleState& state, const VehicleState& ref, const CostWeights& weights) {
  detail::require_finite("terminal_cost", state.x, state.y, state.heading, state.speed, ref.x, ref.y, ref.heading,
                         ref.speed);
  return detail::weighted_state_deviation(state, ref, weights.Qf);
}

/// J = sum_t stage_cost(t) + terminal_cost(N). Stage costs are collected into
/// `stage_buffer` and summed by tree_reduce; both buffers are caller scratch.
inline double trajectory_cost(std::span<const VehicleState> trajectory, std::span<const VehicleState> reference,
                              std::span<const ControlInput> nominal, std::span<const double> steer_noise,
                              std::span<const double> accel_noise, const CostWeights& weights,
                              std::vector<double>& stage_buffer, std::vector<double>& scratch) {
  const std::size_t n = nominal.size();
  if (n == 0 || trajectory.size() != n + 1 || reference.size() != n + 1 || steer_noise.size() != n ||
      accel_noise.size() != n) {
    throw Error(ErrorCode::LengthMismatch, "trajectory_cost: expected N+1 states and N controls");
  }
  stage_buffer.resize(n);
  for (std::size_t t = 0; t < n; ++t) {
    const ControlInput commanded{nominal[t].steer + steer_noise[t], nominal[t].accel + accel_noise[t]};
    stage_buffer[t] = stage_cost(trajectory[t], reference[t], commanded, weights);
  }
  return tree_reduce(stage_buffer, scratch) + terminal_cost(trajectory[n], reference[n], weights);
}

inline double trajectory_cost(std::span<const VehicleState> trajectory, std::span<const VehicleState> reference,
                              std::span<const ControlInput> nominal, std::span<const double> steer_noise,
                              std::span<const double> accel_noise, const CostWeights& weights) {
  std::vector<double> stage_buffer;
  std::vector<double> scratch;
  return trajectory_cost(trajectory, reference, nominal, steer_noise, accel_noise, weights, stage_buffer, scratch);
}

}  // namespace mppi
