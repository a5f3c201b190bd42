#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <span>
#include <vector>

#include "mppi/error.hpp"

namespace mppi {

/// Wraps an angle into (-pi, pi].
inline double wrap_angle(double angle) noexcept {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  double wrapped = std::remainder(angle, two_pi);  // [-pi, pi]
  if (wrapped <= -std::numbers::pi) wrapped += two_pi;
  return wrapped;
}

struct VehicleState {
  double x = 0.0;        // m
  double y = 0.0;        // m
  double heading = 0.0;  // rad, (-pi, pi]
  double speed = 0.0;    // m/s

  friend bool operator==(const VehicleState&, const VehicleState&) = default;
};

struct ControlInput {
  double steer = 0.0;  // rad, front wheel
  double accel = 0.0;  // m/s^2

  friend bool operator==(const ControlInput&, const ControlInput&) = default;
};

struct ModelParams {
  double wheelbase = 2.5;
  double dt = 0.02;
  double steer_limit = 0.5;
  double accel_min = -4.0;
  double accel_max = 4.0;
  double speed_max = 12.0;

  void validate() const {
    if (!(wheelbase > 0.0) || !std::isfinite(wheelbase)) throw Error(ErrorCode::ConfigError, "model.wheelbase must be > 0");
    if (!(dt > 0.0) || !std::isfinite(dt)) throw Error(ErrorCode::ConfigError, "model.dt must be > 0");
    if (!(steer_limit > 0.0 && steer_limit < std::numbers::pi / 2)) {
      throw Error(ErrorCode::ConfigError, "model.steer_limit must be in (0, pi/2)");
    }
    if (!(accel_min < accel_max) || !std::isfinite(accel_min) || !std::isfinite(accel_max)) {
      throw Error(ErrorCode::ConfigError, "model.accel_min must be < model.accel_max");
    }
    if (!(speed_max > 0.0) || !std::isfinite(speed_max)) throw Error(ErrorCode::ConfigError, "model.speed_max must be > 0");
  }

  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

struct StateDerivative {
  double x_dot;
  double y_dot;
  double heading_dot;
  double speed_dot;
};

inline ControlInput clamp_control(ControlInput u, const ModelParams& params) noexcept {
  return {std::clamp(u.steer, -params.steer_limit, params.steer_limit),
          std::clamp(u.accel, params.accel_min, params.accel_max)};
}

/// Rear-axle kinematic bicycle. `control` is expected to be clamped already.
inline StateDerivative bicycle_derivative(const VehicleState& s, const ControlInput& u, const ModelParams& params) {
  detail::require_finite("bicycle_derivative", s.x, s.y, s.heading, s.speed, u.steer, u.accel);
  return {s.speed * std::cos(s.heading), s.speed * std::sin(s.heading),
          s.speed * std::tan(u.steer) / params.wheelbase, u.accel};
}

/// One explicit Euler step under the commanded control plus noise. The sum is
/// saturated to actuator limits before it drives the dynamics.
inline VehicleState euler_step(const VehicleState& s, const ControlInput& nominal, const ControlInput& noise,
                               const ModelParams& params) {
  detail::require_finite("euler_step", nominal.steer, nominal.accel, noise.steer, noise.accel);
  const ControlInput applied = clamp_control({nominal.steer + noise.steer, nominal.accel + noise.accel}, params);
  const StateDerivative d = bicycle_derivative(s, applied, params);
  return {s.x + d.x_dot * params.dt, s.y + d.y_dot * params.dt, wrap_angle(s.heading + d.heading_dot * params.dt),
          std::clamp(s.speed + d.speed_dot * params.dt, 0.0, params.speed_max)};
}

/// Writes N + 1 states into `out` (out[0] = x0). No allocation; used by the
/// rollout lanes.
inline void rollout_into(const VehicleState& x0, std::span<const ControlInput> nominal,
                         std::span<const double> steer_noise, std::span<const double> accel_noise,
                         const ModelParams& params, std::span<VehicleState> out) {
  const std::size_t n = nominal.size();
  if (steer_noise.size() != n || accel_noise.size() != n || out.size() != n + 1) {
    throw Error(ErrorCode::LengthMismatch, "rollout: control, noise and trajectory lengths disagree");
  }
  out[0] = x0;
  for (std::size_t t = 0; t < n; ++t) out[t + 1] = euler_step(out[t], nominal[t], {steer_noise[t], accel_noise[t]}, params);
}

inline std::vector<VehicleState> rollout_trajectory(const VehicleState& x0, std::span<const ControlInput> nominal,
                                                    std::span<const double> steer_noise,
                                                    std::span<const double> accel_noise, const ModelParams& params) {
  if (nominal.empty()) throw Error(ErrorCode::LengthMismatch, "rollout: horizon must be >= 1");
  std::vector<VehicleState> trajectory(nominal.size() + 1);
  rollout_into(x0, nominal, steer_noise, accel_noise, params, trajectory);
  return trajectory;
}

}  // namespace mppi
