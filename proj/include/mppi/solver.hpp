#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "mppi/cost.hpp"
#include "mppi/error.hpp"
#include "mppi/model.hpp"
#include "mppi/pipeline.hpp"
#include "mppi/prng.hpp"

namespace mppi {

struct SolverConfig {
  std::size_t K = 1024;
  std::size_t N = 64;
  double lambda = 1.0;
  std::array<double, 2> sigma_u{0.25, 1.0};  // steer (rad), accel (m/s^2)
  std::size_t max_iters = 1;
  std::size_t P = 8;
  std::uint32_t master_seed = 1;
  double smoothing_beta = 0.2;
  ControlInput u_init{};
  std::size_t queue_depth = 64;
  // Partition count of the noise bank; 0 means "same as P". Pinning it makes
  // the noise, and so the whole step, independent of the worker count.
  std::size_t noise_lanes = 0;
  bool prefetch_noise = false;
  TrigBackend trig_backend = TrigBackend::Reference;

  std::size_t effective_noise_lanes() const noexcept { return noise_lanes == 0 ? P : noise_lanes; }

  void validate() const {
    if (K < 1) throw Error(ErrorCode::ConfigError, "solver.K must be >= 1");
    if (N < 1) throw Error(ErrorCode::ConfigError, "solver.N must be >= 1");
    if (!(lambda > 0.0) || !std::isfinite(lambda)) throw Error(ErrorCode::ConfigError, "solver.lambda must be > 0");
    for (double s : sigma_u) {
      if (!(s >= 0.0) || !std::isfinite(s)) throw Error(ErrorCode::ConfigError, "solver.sigma_u entries must be >= 0");
    }
    if (max_iters < 1) throw Error(ErrorCode::ConfigError, "solver.max_iters must be >= 1");
    if (P < 1 || P > K) throw Error(ErrorCode::ConfigError, "solver.P must satisfy 1 <= P <= K");
    if (master_seed == 0) throw Error(ErrorCode::ConfigError, "solver.master_seed must be nonzero");
    if (!(smoothing_beta >= 0.0 && smoothing_beta <= 1.0)) {
      throw Error(ErrorCode::ConfigError, "solver.smoothing_beta must be in [0, 1]");
    }
    if (!std::isfinite(u_init.steer) || !std::isfinite(u_init.accel)) {
      throw Error(ErrorCode::ConfigError, "solver.u_init must be finite");
    }
    if (queue_depth < 1) throw Error(ErrorCode::ConfigError, "solver.queue_depth must be >= 1");
    if (effective_noise_lanes() > K) throw Error(ErrorCode::ConfigError, "solver.noise_lanes must be <= K");
  }

  NoiseConfig noise_config() const {
    NoiseConfig nc;
    nc.trajectories = K;
    nc.horizon = N;
    nc.lanes = effective_noise_lanes();
    nc.sigma_steer = sigma_u[0];
    nc.sigma_accel = sigma_u[1];
    nc.master_seed = master_seed;
    nc.backend = trig_backend;
    return nc;
  }

  StageTopology topology() const { return {P, queue_depth, kStageOrder}; }

  friend bool operator==(const SolverConfig&, const SolverConfig&) = default;
};

inline NoiseBank generate_noise_bank(const SolverConfig& cfg) {
  cfg.validate();
  return generate_noise_bank(cfg.noise_config());
}

struct ControlSequence {
  std::vector<ControlInput> controls;

  ControlSequence() = default;
  explicit ControlSequence(std::vector<ControlInput> c) : controls(std::move(c)) {}
  ControlSequence(std::size_t n, ControlInput fill) : controls(n, fill) {}

  std::size_t size() const noexcept { return controls.size(); }
  const ControlInput& operator[](std::size_t t) const { return controls[t]; }
  ControlInput& operator[](std::size_t t) { return controls[t]; }
  operator std::span<const ControlInput>() const noexcept { return controls; }

  friend bool operator==(const ControlSequence&, const ControlSequence&) = default;
};

struct WeightVector {
  std::vector<double> alphas;

  std::size_t size() const noexcept { return alphas.size(); }
  double operator[](std::size_t k) const { return alphas[k]; }
};

/// Softmax of -J / lambda with the minimum cost subtracted first. The shift
/// cancels in the ratio and keeps the largest term at exp(0) = 1.
inline WeightVector compute_weights(const CostVector& costs, double lambda) {
  if (costs.size() == 0) throw Error(ErrorCode::EmptyInput, "compute_weights: no costs");
  if (!(lambda > 0.0) || !std::isfinite(lambda)) throw Error(ErrorCode::DomainError, "compute_weights: lambda must be > 0");
  for (double j : costs.costs) {
    if (!std::isfinite(j)) throw Error(ErrorCode::NonFinite, "compute_weights: cost");
  }
  const double j_min = *std::min_element(costs.costs.begin(), costs.costs.end());
  WeightVector w;
  w.alphas.resize(costs.size());
  for (std::size_t k = 0; k < costs.size(); ++k) w.alphas[k] = std::exp(-(costs.costs[k] - j_min) / lambda);
  const double denominator = tree_reduce(w.alphas);
  if (!(denominator > 0.0) || !std::isfinite(denominator)) {
    throw Error(ErrorCode::DegenerateWeights, "compute_weights: normaliser is zero or non-finite");
  }
  for (double& a : w.alphas) a /= denominator;
  return w;
}

/// u_t += sum_k alpha_k w_t^(k) per channel, each sum over k tree-reduced.
/// No clamping here; saturation happens when a control is applied.
inline ControlSequence update_controls(const ControlSequence& nominal, const NoiseBank& noise,
                                       const WeightVector& weights) {
  const std::size_t K = weights.size();
  const std::size_t N = nominal.size();
  if (noise.trajectories != K || noise.horizon != N || noise.steer.size() != K * N || noise.accel.size() != K * N) {
    throw Error(ErrorCode::DimensionMismatch, "update_controls: weights, noise and nominal disagree");
  }
  ControlSequence out = nominal;
  std::vector<double> steer_terms(K);
  std::vector<double> accel_terms(K);
  std::vector<double> scratch;
  for (std::size_t t = 0; t < N; ++t) {
    for (std::size_t k = 0; k < K; ++k) {
      steer_terms[k] = weights[k] * noise.steer[k * N + t];
      accel_terms[k] = weights[k] * noise.accel[k * N + t];
    }
    out[t].steer += tree_reduce(steer_terms, scratch);
    out[t].accel += tree_reduce(accel_terms, scratch);
  }
  return out;
}

/// Causal one-pole low-pass along t: s_0 = u_0, s_t = (1-beta) u_t + beta s_{t-1}.
inline ControlSequence smooth_controls(const ControlSequence& seq, double beta) {
  if (!(beta >= 0.0 && beta <= 1.0)) throw Error(ErrorCode::DomainError, "smooth_controls: beta must be in [0, 1]");
  ControlSequence out = seq;
  for (std::size_t t = 1; t < out.size(); ++t) {
    out[t].steer = (1.0 - beta) * seq[t].steer + beta * out[t - 1].steer;
    out[t].accel = (1.0 - beta) * seq[t].accel + beta * out[t - 1].accel;
  }
  return out;
}

/// Warm start for the next control step: drop u_0, append u_init.
inline ControlSequence shift_horizon(const ControlSequence& seq, const ControlInput& u_init) {
  if (seq.size() == 0) throw Error(ErrorCode::LengthMismatch, "shift_horizon: empty sequence");
  ControlSequence out;
  out.controls.reserve(seq.size());
  out.controls.insert(out.controls.end(), seq.controls.begin() + 1, seq.controls.end());
  out.controls.push_back(u_init);
  return out;
}

struct StepDiagnostics {
  double j_min = 0.0;
  double j_mean = 0.0;
  double ess = 0.0;                      // 1 / sum(alpha^2)
  std::array<double, 4> stage_ms{};      // noise, rollout, cost, reduce+update
  double pipeline_end_to_end_ms = 0.0;
  std::size_t iterations = 0;
};

struct StepResult {
  ControlSequence controls;
  StepDiagnostics diagnostics;
};

/// One receding-horizon MPPI update. Owns the lane generators, so successive
/// steps draw fresh noise; not safe to step from several threads at once.
class Solver {
 public:
  Solver(const SolverConfig& cfg, const CostWeights& weights, const ModelParams& params)
      : cfg_((cfg.validate(), cfg)),
        weights_((weights.validate(), weights)),
        params_((params.validate(), params)),
        source_(cfg_.noise_config()),
        prefetcher_(source_, cfg_.P, cfg_.prefetch_noise) {}

  Solver(const Solver&) = delete;
  Solver& operator=(const Solver&) = delete;

  const SolverConfig& config() const noexcept { return cfg_; }
  const CostWeights& weights() const noexcept { return weights_; }
  const ModelParams& params() const noexcept { return params_; }

  ControlSequence initial_controls() const { return ControlSequence(cfg_.N, cfg_.u_init); }

  StepResult step(const VehicleState& x0, std::span<const VehicleState> reference, const ControlSequence& nominal) {
    if (nominal.size() != cfg_.N) throw Error(ErrorCode::LengthMismatch, "solver: nominal must have N controls");
    if (reference.size() != cfg_.N + 1) throw Error(ErrorCode::LengthMismatch, "solver: reference must have N+1 states");
    detail::require_finite("solver x0", x0.x, x0.y, x0.heading, x0.speed);

    StepResult result{nominal, {}};
    auto& diag = result.diagnostics;
    const auto ms = [](Duration d) { return d.count() * 1e3; };
    for (std::size_t iter = 0; iter < cfg_.max_iters; ++iter) {
      const auto t_noise = Clock::now();
      const NoiseBank bank = prefetcher_.next();
      diag.stage_ms[0] += ms(Clock::now() - t_noise);

      const PipelineRun run = run_pipeline(x0, reference, result.controls, bank, cfg_.topology(), weights_, params_);
      diag.stage_ms[0] += ms(run.timings[Stage::Noise].span);
      diag.stage_ms[1] += ms(run.timings[Stage::Rollout].span);
      diag.stage_ms[2] += ms(run.timings[Stage::Cost].span);
      diag.pipeline_end_to_end_ms += ms(run.timings.end_to_end);

      const auto t_reduce = Clock::now();
      const WeightVector alphas = compute_weights(run.costs, cfg_.lambda);
      result.controls = smooth_controls(update_controls(result.controls, bank, alphas), cfg_.smoothing_beta);

      diag.j_min = *std::min_element(run.costs.costs.begin(), run.costs.costs.end());
      diag.j_mean = tree_reduce(run.costs.costs) / static_cast<double>(run.costs.size());
      std::vector<double> squares(alphas.size());
      std::transform(alphas.alphas.begin(), alphas.alphas.end(), squares.begin(), [](double a) { return a * a; });
      diag.ess = 1.0 / tree_reduce(squares);
      diag.stage_ms[3] += ms(run.timings[Stage::Reduce].span) + ms(Clock::now() - t_reduce);
      ++diag.iterations;
    }
    return result;
  }

 private:
  SolverConfig cfg_;
  CostWeights weights_;
  ModelParams params_;
  NoiseSource source_;
  NoisePrefetcher prefetcher_;
};

}  // namespace mppi
