#pragma once

// Closed-loop experiment engine: procedural tracks, reference windows,
// episodes, and benchmark aggregation.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mppi/cost.hpp"
#include "mppi/error.hpp"
#include "mppi/model.hpp"
#include "mppi/prng.hpp"
#include "mppi/solver.hpp"

namespace mppi {

struct Point2 {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point2&, const Point2&) = default;
};

struct TrackParams {
  double r0 = 30.0;              // mean radius, m
  double half_width = 4.0;       // m
  int harmonics = 4;
  std::size_t waypoints = 720;
  double amplitude_scale = 1.0;  // 0 gives a circle
  int max_attempts = 16;

  void validate() const {
    if (!(r0 > 0.0) || !std::isfinite(r0)) throw Error(ErrorCode::ConfigError, "sim.track.r0 must be > 0");
    if (!(half_width > 0.0) || !std::isfinite(half_width)) throw Error(ErrorCode::ConfigError, "sim.track.half_width must be > 0");
    if (harmonics < 0) throw Error(ErrorCode::ConfigError, "sim.track.harmonics must be >= 0");
    if (waypoints < 3) throw Error(ErrorCode::ConfigError, "sim.track.waypoints must be >= 3");
    if (!(amplitude_scale >= 0.0 && amplitude_scale <= 1.0)) {
      throw Error(ErrorCode::ConfigError, "sim.track.amplitude_scale must be in [0, 1]");
    }
    if (max_attempts < 1) throw Error(ErrorCode::ConfigError, "sim.track.max_attempts must be >= 1");
  }

  friend bool operator==(const TrackParams&, const TrackParams&) = default;
};

/// Closed centerline: the last waypoint repeats the first.
struct Track {
  std::vector<Point2> centerline;
  double half_width = 0.0;
  double arc_length = 0.0;
  int track_id = 0;
  std::uint32_t generator_seed = 0;
  std::vector<double> cumulative;  // arc length at each waypoint, cumulative.back() == arc_length
  std::vector<double> tangent;     // heading at each waypoint (central difference)

  std::size_t segments() const noexcept { return centerline.size() - 1; }
};

namespace detail {

inline double cross(Point2 o, Point2 a, Point2 b) noexcept { return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x); }

inline bool segments_cross(Point2 a, Point2 b, Point2 c, Point2 d) noexcept {
  const double d1 = cross(c, d, a);
  const double d2 = cross(c, d, b);
  const double d3 = cross(a, b, c);
  const double d4 = cross(a, b, d);
  return ((d1 > 0) != (d2 > 0)) && ((d3 > 0) != (d4 > 0)) && d1 != 0 && d2 != 0 && d3 != 0 && d4 != 0;
}

inline void finish_track(Track& track) {
  const auto& p = track.centerline;
  const std::size_t n = track.segments();
  track.cumulative.assign(p.size(), 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    track.cumulative[i + 1] = track.cumulative[i] + std::hypot(p[i + 1].x - p[i].x, p[i + 1].y - p[i].y);
  }
  track.arc_length = track.cumulative.back();
  track.tangent.assign(p.size(), 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const Point2 prev = p[(i + n - 1) % n];
    const Point2 next = p[i + 1];
    track.tangent[i] = std::atan2(next.y - prev.y, next.x - prev.x);
  }
  track.tangent[n] = track.tangent[0];
}

}  // namespace detail

/// Checks closure, waypoint spacing in [0.1, 5] m, and that no two
/// non-adjacent centerline segments cross. Returns a reason on failure.
inline std::optional<std::string> validate_track(const Track& track) {
  const auto& p = track.centerline;
  if (p.size() < 4) return "too few waypoints";
  if (std::hypot(p.front().x - p.back().x, p.front().y - p.back().y) > 1e-9) return "centerline is not closed";
  const std::size_t n = track.segments();
  for (std::size_t i = 0; i < n; ++i) {
    const double spacing = std::hypot(p[i + 1].x - p[i].x, p[i + 1].y - p[i].y);
    if (spacing < 0.1 || spacing > 5.0) return "waypoint spacing outside [0.1, 5] m";
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 2; j < n; ++j) {
      if (i == 0 && j == n - 1) continue;  // adjacent through the closing point
      if (detail::segments_cross(p[i], p[i + 1], p[j], p[j + 1])) return "centerline self-intersects";
    }
  }
  return std::nullopt;
}

/// Star-shaped loop r(phi) = r0 + sum_h a_h sin(h phi + psi_h). Amplitudes are
/// a_h = scale * u_h * 0.3 r0 / h^2 with u_h uniform in [0, 1), which keeps r
/// within [0.5 r0, 1.5 r0] since 0.3 * sum 1/h^2 < 0.5.
inline Track generate_track(std::uint32_t seed, const TrackParams& params, int track_id = 0) {
  params.validate();
  if (seed == 0) throw Error(ErrorCode::ZeroSeed, "track seed must be nonzero");
  std::uint32_t attempt_seed = seed;
  for (int attempt = 0; attempt < params.max_attempts; ++attempt) {
    XorShift32 gen(attempt_seed);
    std::vector<double> amplitude(params.harmonics + 1, 0.0);
    std::vector<double> phase(params.harmonics + 1, 0.0);
    for (int h = 1; h <= params.harmonics; ++h) {
      amplitude[h] = params.amplitude_scale * to_unit(gen()) * 0.3 * params.r0 / (h * h);
      phase[h] = 2.0 * std::numbers::pi * to_unit(gen());
    }
    Track track;
    track.half_width = params.half_width;
    track.track_id = track_id;
    track.generator_seed = attempt_seed;
    track.centerline.reserve(params.waypoints + 1);
    for (std::size_t i = 0; i < params.waypoints; ++i) {
      const double phi = 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(params.waypoints);
      double r = params.r0;
      for (int h = 1; h <= params.harmonics; ++h) r += amplitude[h] * std::sin(h * phi + phase[h]);
      track.centerline.push_back({r * std::cos(phi), r * std::sin(phi)});
    }
    track.centerline.push_back(track.centerline.front());
    if (!validate_track(track)) {
      detail::finish_track(track);
      return track;
    }
    attempt_seed = XorShift32::advance(attempt_seed);
  }
  throw Error(ErrorCode::TrackGenFailure, "no valid track after " + std::to_string(params.max_attempts) + " attempts");
}

/// Builds a track from explicit closed-loop waypoints (last == first).
inline Track make_track(std::vector<Point2> centerline, double half_width, int track_id = 0) {
  Track track;
  track.centerline = std::move(centerline);
  track.half_width = half_width;
  track.track_id = track_id;
  if (auto reason = validate_track(track)) throw Error(ErrorCode::TrackGenFailure, *reason);
  detail::finish_track(track);
  return track;
}

struct TrackPose {
  Point2 position;
  double heading;
};

/// Position and tangent heading at arc length s (wrapped onto the loop).
/// Headings are interpolated between waypoint tangents so they vary
/// continuously along the loop.
inline TrackPose pose_at(const Track& track, double s) {
  s = std::fmod(s, track.arc_length);
  if (s < 0.0) s += track.arc_length;
  const auto it = std::upper_bound(track.cumulative.begin(), track.cumulative.end(), s);
  std::size_t i = static_cast<std::size_t>(std::max<std::ptrdiff_t>(0, (it - track.cumulative.begin()) - 1));
  i = std::min(i, track.segments() - 1);
  const double length = track.cumulative[i + 1] - track.cumulative[i];
  const double f = length > 0.0 ? (s - track.cumulative[i]) / length : 0.0;
  const Point2 a = track.centerline[i];
  const Point2 b = track.centerline[i + 1];
  const double h0 = track.tangent[i];
  const double dh = wrap_angle(track.tangent[i + 1] - h0);
  return {{a.x + f * (b.x - a.x), a.y + f * (b.y - a.y)}, wrap_angle(h0 + f * dh)};
}

struct Projection {
  double s;         // arc length of the nearest centerline point
  double distance;  // cross-track error, m
};

/// Nearest point on the piecewise-linear centerline.
inline Projection project_onto_track(const Track& track, Point2 p) {
  Projection best{0.0, std::numeric_limits<double>::infinity()};
  for (std::size_t i = 0; i < track.segments(); ++i) {
    const Point2 a = track.centerline[i];
    const Point2 b = track.centerline[i + 1];
    const double vx = b.x - a.x;
    const double vy = b.y - a.y;
    const double len2 = vx * vx + vy * vy;
    const double f = len2 > 0.0 ? std::clamp(((p.x - a.x) * vx + (p.y - a.y) * vy) / len2, 0.0, 1.0) : 0.0;
    const double d = std::hypot(p.x - (a.x + f * vx), p.y - (a.y + f * vy));
    if (d < best.distance) best = {track.cumulative[i] + f * (track.cumulative[i + 1] - track.cumulative[i]), d};
  }
  if (best.s >= track.arc_length) best.s -= track.arc_length;
  return best;
}

struct ReferenceTrajectory {
  std::vector<VehicleState> states;
  double target_speed = 0.0;
};

/// N + 1 centerline states spaced target_speed * dt apart ahead of `progress`.
inline ReferenceTrajectory reference_window(const Track& track, double progress, std::size_t N, double target_speed,
                                            double dt) {
  ReferenceTrajectory ref;
  ref.target_speed = target_speed;
  ref.states.reserve(N + 1);
  for (std::size_t t = 0; t <= N; ++t) {
    const TrackPose pose = pose_at(track, progress + static_cast<double>(t) * target_speed * dt);
    ref.states.push_back({pose.position.x, pose.position.y, pose.heading, target_speed});
  }
  return ref;
}

inline constexpr std::size_t kStartPoints = 11;

/// Start `index` of `count` points evenly spaced by arc length, at rest and
/// aligned with the tangent.
inline VehicleState start_state(const Track& track, std::size_t index, std::size_t count = kStartPoints) {
  if (index >= count) throw Error(ErrorCode::ConfigError, "start index out of range");
  const TrackPose pose = pose_at(track, track.arc_length * static_cast<double>(index) / static_cast<double>(count));
  return {pose.position.x, pose.position.y, pose.heading, 0.0};
}

struct EpisodeLimits {
  std::size_t max_steps = 6000;
  double fail_distance = 2.0;  // m

  friend bool operator==(const EpisodeLimits&, const EpisodeLimits&) = default;
};

struct EpisodeOptions {
  double target_speed = 6.0;
  EpisodeLimits limits;
  std::size_t start_count = kStartPoints;
  // Plant model; defaults to the solver's model (no mismatch).
  std::optional<ModelParams> plant;
};

struct StepLog {
  std::size_t t = 0;
  VehicleState state;  // after applying the control
  double ref_x = 0.0;
  double ref_y = 0.0;
  double cross_track_cm = 0.0;
  StepDiagnostics diagnostics;
  double latency_ms = 0.0;
};

struct RunMetrics {
  double avg_position_error_cm = 0.0;
  double max_position_error_cm = 0.0;
  std::vector<double> per_step_latency_ms;
  bool success = false;
  bool lap_completed = false;
  std::size_t steps_taken = 0;
};

struct EpisodeResult {
  RunMetrics metrics;
  std::vector<StepLog> log;
};

/// Closed loop from one start point: reference window, MPPI step, apply u_0
/// to the plant, shift the horizon. Ends on lap completion, divergence past
/// fail_distance, or max_steps.
inline EpisodeResult run_episode(const Track& track, std::size_t start_index, const SolverConfig& solver_cfg,
                                 const CostWeights& weights, const ModelParams& params,
                                 const EpisodeOptions& options = {}) {
  Solver solver(solver_cfg, weights, params);
  const ModelParams plant = options.plant.value_or(params);
  plant.validate();

  EpisodeResult result;
  VehicleState state = start_state(track, start_index, options.start_count);
  Projection where = project_onto_track(track, {state.x, state.y});
  double progress = 0.0;
  double error_sum_cm = 0.0;
  ControlSequence nominal = solver.initial_controls();

  for (std::size_t t = 0; t < options.limits.max_steps; ++t) {
    const auto ref = reference_window(track, where.s, solver_cfg.N, options.target_speed, params.dt);

    const auto started = std::chrono::steady_clock::now();
    StepResult step = solver.step(state, ref.states, nominal);
    const double latency_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started).count();

    state = euler_step(state, step.controls[0], {0.0, 0.0}, plant);
    nominal = shift_horizon(step.controls, solver_cfg.u_init);

    const Projection next = project_onto_track(track, {state.x, state.y});
    double advance = next.s - where.s;
    if (advance > track.arc_length / 2) advance -= track.arc_length;
    if (advance < -track.arc_length / 2) advance += track.arc_length;
    progress += advance;
    where = next;

    const double cte_cm = next.distance * 100.0;
    error_sum_cm += cte_cm;
    auto& m = result.metrics;
    m.max_position_error_cm = std::max(m.max_position_error_cm, cte_cm);
    m.per_step_latency_ms.push_back(latency_ms);
    m.steps_taken = t + 1;
    result.log.push_back({t, state, ref.states[0].x, ref.states[0].y, cte_cm, step.diagnostics, latency_ms});

    if (next.distance > options.limits.fail_distance) break;
    if (progress >= track.arc_length) {
      m.lap_completed = true;
      break;
    }
  }

  auto& m = result.metrics;
  if (m.steps_taken > 0) m.avg_position_error_cm = error_sum_cm / static_cast<double>(m.steps_taken);
  m.success = m.lap_completed && m.max_position_error_cm <= options.limits.fail_distance * 100.0;
  return result;
}

// ---------------------------------------------------------------------------
// Benchmark

struct SuiteConfig {
  SolverConfig solver;
  CostWeights weights;
  ModelParams model;
  TrackParams track;
  std::vector<std::uint32_t> track_seeds{11, 22, 33, 44, 55};
  std::vector<std::size_t> start_indices;  // empty: all kStartPoints
  std::size_t repeats = 20;
  double target_speed = 6.0;
  EpisodeLimits limits;
  double plant_wheelbase_scale = 1.0;

  std::vector<std::size_t> starts() const {
    if (!start_indices.empty()) return start_indices;
    std::vector<std::size_t> all(kStartPoints);
    for (std::size_t i = 0; i < kStartPoints; ++i) all[i] = i;
    return all;
  }
};

/// Solver seed for one (track, start, repeat) cell: a murmur-style mix of the
/// master seed and the cell coordinates, never zero.
inline std::uint32_t episode_seed(std::uint32_t master, std::size_t track, std::size_t start, std::size_t repeat) {
  std::uint32_t h = master;
  for (std::uint32_t v : {static_cast<std::uint32_t>(track), static_cast<std::uint32_t>(start),
                          static_cast<std::uint32_t>(repeat)}) {
    h ^= v + 0x9E3779B9u + (h << 6) + (h >> 2);
    h ^= h >> 16;
    h *= 0x85EBCA6Bu;
    h ^= h >> 13;
    h *= 0xC2B2AE35u;
    h ^= h >> 16;
  }
  return h == 0 ? 1u : h;
}

struct EpisodeRecord {
  int track_id = 0;
  std::size_t start_index = 0;
  std::size_t repeat = 0;
  std::uint32_t solver_seed = 0;
  RunMetrics metrics;
  std::vector<Point2> path;
};

struct AggregateRow {
  int track_id = -1;  // -1 for the all-tracks row
  std::size_t episodes = 0;
  double success_rate = 0.0;
  double mean_error_cm = 0.0;
  double mean_latency_ms = 0.0;
  double p50_latency_ms = 0.0;
  double p99_latency_ms = 0.0;
};

struct BenchmarkResult {
  std::vector<Track> tracks;
  std::vector<EpisodeRecord> episodes;
  std::vector<AggregateRow> per_track;
  AggregateRow overall;
};

/// Nearest-rank percentile; `values` is copied and sorted.
inline double percentile(std::vector<double> values, double q) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const auto rank = static_cast<std::size_t>(std::ceil(q / 100.0 * static_cast<double>(values.size())));
  return values[std::clamp<std::size_t>(rank, 1, values.size()) - 1];
}

inline double mean(std::span<const double> values) {
  if (values.empty()) return 0.0;
  double s = 0.0;
  for (double v : values) s += v;
  return s / static_cast<double>(values.size());
}

inline AggregateRow aggregate(std::span<const EpisodeRecord* const> episodes, int track_id) {
  AggregateRow row;
  row.track_id = track_id;
  row.episodes = episodes.size();
  if (episodes.empty()) return row;
  std::vector<double> latencies;
  std::vector<double> errors;
  std::size_t successes = 0;
  for (const auto* e : episodes) {
    successes += e->metrics.success ? 1 : 0;
    errors.push_back(e->metrics.avg_position_error_cm);
    latencies.insert(latencies.end(), e->metrics.per_step_latency_ms.begin(), e->metrics.per_step_latency_ms.end());
  }
  row.success_rate = static_cast<double>(successes) / static_cast<double>(episodes.size());
  row.mean_error_cm = mean(errors);
  row.mean_latency_ms = mean(latencies);
  row.p50_latency_ms = percentile(latencies, 50.0);
  row.p99_latency_ms = percentile(latencies, 99.0);
  return row;
}

using EpisodeSink = std::function<void(const EpisodeRecord&, const EpisodeResult&)>;

/// tracks x starts x repeats, run serially. `sink` sees every episode's full
/// log before it is dropped; only metrics and the driven path are retained.
inline BenchmarkResult run_benchmark(const SuiteConfig& suite, const EpisodeSink& sink = {}) {
  suite.solver.validate();
  suite.weights.validate();
  suite.model.validate();
  suite.track.validate();
  if (suite.track_seeds.empty()) throw Error(ErrorCode::ConfigError, "need at least one track seed");
  if (suite.repeats < 1) throw Error(ErrorCode::ConfigError, "repeats must be >= 1");

  BenchmarkResult out;
  for (std::size_t i = 0; i < suite.track_seeds.size(); ++i) {
    out.tracks.push_back(generate_track(suite.track_seeds[i], suite.track, static_cast<int>(i)));
  }

  EpisodeOptions options;
  options.target_speed = suite.target_speed;
  options.limits = suite.limits;
  if (suite.plant_wheelbase_scale != 1.0) {
    ModelParams plant = suite.model;
    plant.wheelbase *= suite.plant_wheelbase_scale;
    options.plant = plant;
  }

  for (const Track& track : out.tracks) {
    for (std::size_t start : suite.starts()) {
      for (std::size_t repeat = 0; repeat < suite.repeats; ++repeat) {
        SolverConfig cfg = suite.solver;
        cfg.master_seed = episode_seed(suite.solver.master_seed, static_cast<std::size_t>(track.track_id), start, repeat);
        EpisodeResult episode = run_episode(track, start, cfg, suite.weights, suite.model, options);
        EpisodeRecord record{track.track_id, start, repeat, cfg.master_seed, std::move(episode.metrics), {}};
        record.path.reserve(episode.log.size());
        for (const auto& step : episode.log) record.path.push_back({step.state.x, step.state.y});
        if (sink) sink(record, episode);
        out.episodes.push_back(std::move(record));
      }
    }
  }

  std::vector<const EpisodeRecord*> all;
  for (const auto& e : out.episodes) all.push_back(&e);
  out.overall = aggregate(all, -1);
  for (const Track& track : out.tracks) {
    std::vector<const EpisodeRecord*> subset;
    for (const auto& e : out.episodes) {
      if (e.track_id == track.track_id) subset.push_back(&e);
    }
    out.per_track.push_back(aggregate(subset, track.track_id));
  }
  return out;
}

}  // namespace mppi
