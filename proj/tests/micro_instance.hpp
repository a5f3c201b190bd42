#pragma once

// K = 2, N = 2 instance with a fixed noise bank, default model and cost
// weights, lambda = 1 and beta = 0.2. Expected values come from
// tests/oracles/micro_instance.py (50-digit evaluation written separately
// from the library).

#include <array>
#include <vector>

#include "mppi/solver.hpp"

namespace micro {

inline constexpr mppi::VehicleState kX0{0.0, 0.0, 0.1, 1.0};

inline std::vector<mppi::VehicleState> reference_states() {
  return {{0.0, 0.0, 0.0, 2.0}, {0.04, 0.01, 0.0, 2.0}, {0.08, 0.02, 0.0, 2.0}};
}

inline mppi::ControlSequence nominal_controls() { return mppi::ControlSequence({{0.1, 0.5}, {-0.05, 3.0}}); }

inline mppi::NoiseBank noise_bank() {
  mppi::NoiseBank bank;
  bank.trajectories = 2;
  bank.horizon = 2;
  bank.steer = {0.2, -0.1, -0.3, 0.05};
  bank.accel = {0.5, -1.0, 2.0, 2.0};
  return bank;
}

inline constexpr std::array<double, 2> kCosts{9.3275542987444642426, 21.676586795168519658};
inline constexpr std::array<double, 2> kAlphas{0.99999566607443801632, 4.3339255619836755955e-6};
inline constexpr std::array<std::array<double, 2>, 2> kUpdated{{{0.29999783303721900816, 1.0000065008883429755},
                                                                {-0.14999934991116570245, 2.000013001776685951}}};
inline constexpr std::array<std::array<double, 2>, 2> kSmoothed{
    {{0.29999783303721900816, 1.0000065008883429755}, {-0.059999913321488760326, 1.8000117015990173559}}};

}  // namespace micro
