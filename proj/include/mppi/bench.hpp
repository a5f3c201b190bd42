#pragma once

// mppi_step latency over a (K, P) sweep on a fixed closed-loop scenario.

#include <array>
#include <chrono>
#include <filesystem>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "mppi/config.hpp"
#include "mppi/report.hpp"
#include "mppi/sim.hpp"
#include "mppi/solver.hpp"

namespace mppi {

inline constexpr std::array<std::string_view, 11> kLatencyColumns{
    "K", "P", "steps", "warmup", "mean_ms", "median_ms", "p99_ms", "final_x", "final_y", "final_speed",
    "hardware_threads"};

struct LatencyRow {
  std::size_t K = 0;
  std::size_t P = 0;
  std::size_t steps = 0;
  std::size_t warmup = 0;
  double mean_ms = 0.0;
  double median_ms = 0.0;
  double p99_ms = 0.0;
  VehicleState final_state;  // deterministic given seeds; a check that runs did the same work
  unsigned hardware_threads = 0;
};

/// Drives the vehicle from start 0 of the first configured track for
/// warmup + steps control steps and times only the solver call.
inline LatencyRow measure_latency(const ExperimentConfig& cfg, std::size_t K, std::size_t P, const Track& track) {
  SolverConfig solver_cfg = cfg.solver;
  solver_cfg.K = K;
  solver_cfg.P = P;
  Solver solver(solver_cfg, cfg.cost, cfg.model);

  VehicleState state = start_state(track, 0);
  ControlSequence nominal = solver.initial_controls();
  std::vector<double> latencies;
  latencies.reserve(cfg.bench.steps);
  for (std::size_t i = 0; i < cfg.bench.warmup + cfg.bench.steps; ++i) {
    const double s = project_onto_track(track, {state.x, state.y}).s;
    const auto ref = reference_window(track, s, solver_cfg.N, cfg.sim.target_speed, cfg.model.dt);
    const auto started = std::chrono::steady_clock::now();
    StepResult step = solver.step(state, ref.states, nominal);
    const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started).count();
    if (i >= cfg.bench.warmup) latencies.push_back(ms);
    state = euler_step(state, step.controls[0], {0.0, 0.0}, cfg.model);
    nominal = shift_horizon(step.controls, solver_cfg.u_init);
  }

  LatencyRow row;
  row.K = K;
  row.P = P;
  row.steps = cfg.bench.steps;
  row.warmup = cfg.bench.warmup;
  row.mean_ms = mean(latencies);
  row.median_ms = percentile(latencies, 50.0);
  row.p99_ms = percentile(latencies, 99.0);
  row.final_state = state;
  row.hardware_threads = std::thread::hardware_concurrency();
  return row;
}

inline std::vector<LatencyRow> run_latency_sweep(const ExperimentConfig& cfg) {
  cfg.validate();
  const Track track = generate_track(cfg.track_seeds.front(), cfg.sim.track, 0);
  std::vector<LatencyRow> rows;
  for (const auto& point : cfg.bench.sweep) rows.push_back(measure_latency(cfg, point.K, point.P, track));
  return rows;
}

inline void write_latency_csv(const std::filesystem::path& path, const std::vector<LatencyRow>& rows) {
  CsvWriter csv(path, kLatencyColumns);
  for (const auto& r : rows) {
    csv.row(r.K, r.P, r.steps, r.warmup, r.mean_ms, r.median_ms, r.p99_ms, r.final_state.x, r.final_state.y,
            r.final_state.speed, r.hardware_threads);
  }
  csv.close();
}

}  // namespace mppi
