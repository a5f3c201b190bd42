#pragma once

// Four-stage dataflow executor: noise dispatch -> rollout -> cost -> reduce.
// Rollout and cost run as P lanes connected by bounded FIFOs; the reduce stage
// gathers all K costs on the calling thread. This is the only place in the
// library that starts threads.

#include <algorithm>
#include <array>
#include <chrono>
#include <condition_variable>
#include <cstddef>
#include <deque>
#include <exception>
#include <future>
#include <mutex>
#include <optional>
#include <span>
#include <string_view>
#include <thread>
#include <vector>

#include "mppi/cost.hpp"
#include "mppi/error.hpp"
#include "mppi/model.hpp"
#include "mppi/prng.hpp"

namespace mppi {

/// Blocking FIFO with a fixed capacity. close() wakes every waiter: pushes
/// then fail and pops drain whatever is left before returning nullopt.
template <typename T>
class BoundedQueue {
 public:
  explicit BoundedQueue(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw Error(ErrorCode::ConfigError, "queue capacity must be >= 1");
  }

  BoundedQueue(const BoundedQueue&) = delete;
  BoundedQueue& operator=(const BoundedQueue&) = delete;

  bool push(T item) {
    std::unique_lock lock(mutex_);
    not_full_.wait(lock, [&] { return closed_ || items_.size() < capacity_; });
    if (closed_) return false;
    items_.push_back(std::move(item));
    peak_ = std::max(peak_, items_.size());
    lock.unlock();
    not_empty_.notify_one();
    return true;
  }

  std::optional<T> pop() {
    std::unique_lock lock(mutex_);
    not_empty_.wait(lock, [&] { return closed_ || !items_.empty(); });
    if (items_.empty()) return std::nullopt;
    T item = std::move(items_.front());
    items_.pop_front();
    lock.unlock();
    not_full_.notify_one();
    return item;
  }

  void close() {
    {
      std::lock_guard lock(mutex_);
      closed_ = true;
    }
    not_full_.notify_all();
    not_empty_.notify_all();
  }

  std::size_t capacity() const noexcept { return capacity_; }

  std::size_t peak() const {
    std::lock_guard lock(mutex_);
    return peak_;
  }

 private:
  const std::size_t capacity_;
  mutable std::mutex mutex_;
  std::condition_variable not_full_;
  std::condition_variable not_empty_;
  std::deque<T> items_;
  std::size_t peak_ = 0;
  bool closed_ = false;
};

enum class Stage { Noise = 0, Rollout = 1, Cost = 2, Reduce = 3 };

inline constexpr std::array<Stage, 4> kStageOrder{Stage::Noise, Stage::Rollout, Stage::Cost, Stage::Reduce};

constexpr std::string_view stage_name(Stage s) noexcept {
  switch (s) {
    case Stage::Noise: return "noise";
    case Stage::Rollout: return "rollout";
    case Stage::Cost: return "cost";
    case Stage::Reduce: return "reduce";
  }
  return "?";
}

struct StageTopology {
  std::size_t lanes = 8;
  std::size_t queue_depth = 64;
  std::array<Stage, 4> stage_order = kStageOrder;

  void validate() const {
    if (lanes < 1) throw Error(ErrorCode::ConfigError, "pipeline lanes must be >= 1");
    if (queue_depth < 1) throw Error(ErrorCode::ConfigError, "pipeline queue_depth must be >= 1");
    if (stage_order != kStageOrder) throw Error(ErrorCode::ConfigError, "pipeline stage order is fixed");
  }
};

template <typename Payload>
struct TrajectoryPacket {
  std::size_t index;
  Payload payload;
};

struct NoiseRow {
  std::span<const double> steer;
  std::span<const double> accel;
};

using NoisePacket = TrajectoryPacket<NoiseRow>;
using RolloutPacket = TrajectoryPacket<std::vector<VehicleState>>;
using CostPacket = TrajectoryPacket<double>;

using Clock = std::chrono::steady_clock;
using Duration = std::chrono::duration<double>;

struct StageRecord {
  Duration span{0.0};  // first packet in to last packet out
  Duration busy{0.0};  // summed over lanes
  std::size_t packets = 0;

  double throughput() const noexcept { return span.count() > 0.0 ? static_cast<double>(packets) / span.count() : 0.0; }
};

struct StageTimings {
  std::array<StageRecord, 4> stages{};
  Duration end_to_end{0.0};

  const StageRecord& operator[](Stage s) const { return stages[static_cast<std::size_t>(s)]; }
  StageRecord& operator[](Stage s) { return stages[static_cast<std::size_t>(s)]; }
};

struct QueueReport {
  std::string_view name;
  std::size_t capacity;
  std::size_t peak;
};

struct PipelineRun {
  CostVector costs;
  StageTimings timings;
  std::vector<QueueReport> queues;
  std::vector<bool> seen;  // index bitmap from the reduce stage

  bool complete() const { return std::all_of(seen.begin(), seen.end(), [](bool b) { return b; }); }
};

inline const StageTimings& stage_timings(const PipelineRun& run) noexcept { return run.timings; }

namespace detail {

inline void check_pipeline_inputs(std::span<const VehicleState> reference, std::span<const ControlInput> nominal,
                                  const NoiseBank& bank) {
  const std::size_t n = nominal.size();
  if (n == 0) throw Error(ErrorCode::DimensionMismatch, "pipeline: horizon must be >= 1");
  if (bank.horizon != n || bank.trajectories == 0 || bank.steer.size() != bank.trajectories * n ||
      bank.accel.size() != bank.trajectories * n) {
    throw Error(ErrorCode::DimensionMismatch, "pipeline: noise bank does not match K x N");
  }
  if (reference.size() != n + 1) throw Error(ErrorCode::LengthMismatch, "pipeline: reference must have N+1 states");
}

// Per-thread timing accumulator, merged after join.
struct LaneClock {
  std::optional<Clock::time_point> first;
  Clock::time_point last{};
  Duration busy{0.0};
  std::size_t packets = 0;

  void record(Clock::time_point start, Clock::time_point end) {
    if (!first) first = start;
    last = end;
    busy += end - start;
    ++packets;
  }
};

inline StageRecord merge(std::span<const LaneClock> clocks) {
  StageRecord out;
  std::optional<Clock::time_point> first;
  Clock::time_point last{};
  for (const auto& c : clocks) {
    if (!c.first) continue;
    if (!first || *c.first < *first) first = c.first;
    last = std::max(last, c.last);
    out.busy += c.busy;
    out.packets += c.packets;
  }
  if (first) out.span = last - *first;
  return out;
}

class FailureLatch {
 public:
  void capture() {
    std::lock_guard lock(mutex_);
    if (!error_) error_ = std::current_exception();
  }
  void rethrow_if_failed() const {
    std::lock_guard lock(mutex_);
    if (error_) std::rethrow_exception(error_);
  }
  bool failed() const {
    std::lock_guard lock(mutex_);
    return static_cast<bool>(error_);
  }

 private:
  mutable std::mutex mutex_;
  std::exception_ptr error_;
};

}  // namespace detail

/// Plain loop over k then t with no concurrency. The determinism oracle for
/// run_pipeline.
inline CostVector run_sequential_reference(const VehicleState& x0, std::span<const VehicleState> reference,
                                           std::span<const ControlInput> nominal, const NoiseBank& bank,
                                           const CostWeights& weights, const ModelParams& params) {
  detail::check_pipeline_inputs(reference, nominal, bank);
  CostVector out;
  out.costs.resize(bank.trajectories);
  std::vector<double> stage_buffer;
  std::vector<double> scratch;
  for (std::size_t k = 0; k < bank.trajectories; ++k) {
    const auto trajectory = rollout_trajectory(x0, nominal, bank.steer_row(k), bank.accel_row(k), params);
    out.costs[k] = trajectory_cost(trajectory, reference, nominal, bank.steer_row(k), bank.accel_row(k), weights,
                                   stage_buffer, scratch);
  }
  return out;
}

/// Runs the staged executor. Trajectory k travels through lane k mod P. The
/// per-trajectory arithmetic is the same as run_sequential_reference, so the
/// result is bit-identical for every lane count and queue depth.
inline PipelineRun run_pipeline(const VehicleState& x0, std::span<const VehicleState> reference,
                                std::span<const ControlInput> nominal, const NoiseBank& bank,
                                const StageTopology& topology, const CostWeights& weights,
                                const ModelParams& params) {
  detail::check_pipeline_inputs(reference, nominal, bank);
  topology.validate();
  const std::size_t K = bank.trajectories;
  const std::size_t N = nominal.size();
  const std::size_t P = topology.lanes;
  const std::size_t depth = topology.queue_depth;

  std::vector<std::unique_ptr<BoundedQueue<NoisePacket>>> noise_queues;
  std::vector<std::unique_ptr<BoundedQueue<RolloutPacket>>> rollout_queues;
  for (std::size_t p = 0; p < P; ++p) {
    noise_queues.push_back(std::make_unique<BoundedQueue<NoisePacket>>(depth));
    rollout_queues.push_back(std::make_unique<BoundedQueue<RolloutPacket>>(depth));
  }
  BoundedQueue<CostPacket> cost_queue(depth);

  detail::FailureLatch failure;
  auto close_all = [&] {
    for (auto& q : noise_queues) q->close();
    for (auto& q : rollout_queues) q->close();
    cost_queue.close();
  };

  detail::LaneClock noise_clock;
  std::vector<detail::LaneClock> rollout_clocks(P);
  std::vector<detail::LaneClock> cost_clocks(P);
  detail::LaneClock reduce_clock;

  PipelineRun run;
  run.costs.costs.assign(K, 0.0);
  run.seen.assign(K, false);

  const auto started = Clock::now();
  {
    std::vector<std::jthread> workers;
    workers.reserve(2 * P + 1);

    // Stage 1: dispatch noise rows in trajectory order.
    workers.emplace_back([&] {
      try {
        for (std::size_t k = 0; k < K; ++k) {
          const auto t0 = Clock::now();
          const bool ok = noise_queues[k % P]->push({k, {bank.steer_row(k), bank.accel_row(k)}});
          noise_clock.record(t0, Clock::now());
          if (!ok) break;
        }
      } catch (...) {
        failure.capture();
        close_all();
      }
      for (auto& q : noise_queues) q->close();
    });

    for (std::size_t p = 0; p < P; ++p) {
      // Stage 2: rollouts.
      workers.emplace_back([&, p] {
        try {
          while (auto packet = noise_queues[p]->pop()) {
            const auto t0 = Clock::now();
            RolloutPacket out{packet->index, std::vector<VehicleState>(N + 1)};
            rollout_into(x0, nominal, packet->payload.steer, packet->payload.accel, params, out.payload);
            rollout_clocks[p].record(t0, Clock::now());
            if (!rollout_queues[p]->push(std::move(out))) break;
          }
        } catch (...) {
          failure.capture();
          close_all();
        }
        rollout_queues[p]->close();
      });
      // Stage 3: per-trajectory cost.
      workers.emplace_back([&, p] {
        std::vector<double> stage_buffer;
        std::vector<double> scratch;
        try {
          while (auto packet = rollout_queues[p]->pop()) {
            const auto t0 = Clock::now();
            const std::size_t k = packet->index;
            const double J = trajectory_cost(packet->payload, reference, nominal, bank.steer_row(k),
                                             bank.accel_row(k), weights, stage_buffer, scratch);
            cost_clocks[p].record(t0, Clock::now());
            if (!cost_queue.push({k, J})) break;
          }
        } catch (...) {
          failure.capture();
          close_all();
        }
      });
    }

    // Stage 4: gather every cost exactly once.
    try {
      for (std::size_t received = 0; received < K; ++received) {
        auto packet = cost_queue.pop();
        if (!packet) break;
        const auto t0 = Clock::now();
        if (packet->index >= K || run.seen[packet->index]) {
          throw Error(ErrorCode::PipelineFailure, "reduce stage saw an out-of-range or duplicate trajectory index");
        }
        run.seen[packet->index] = true;
        run.costs.costs[packet->index] = packet->payload;
        reduce_clock.record(t0, Clock::now());
      }
    } catch (...) {
      failure.capture();
    }
    close_all();
  }  // join
  run.timings.end_to_end = Clock::now() - started;

  failure.rethrow_if_failed();
  if (!run.complete()) throw Error(ErrorCode::PipelineFailure, "reduce stage finished without every trajectory");

  run.timings[Stage::Noise] = detail::merge(std::span(&noise_clock, 1));
  run.timings[Stage::Rollout] = detail::merge(rollout_clocks);
  run.timings[Stage::Cost] = detail::merge(cost_clocks);
  run.timings[Stage::Reduce] = detail::merge(std::span(&reduce_clock, 1));

  for (const auto& q : noise_queues) run.queues.push_back({"noise", q->capacity(), q->peak()});
  for (const auto& q : rollout_queues) run.queues.push_back({"rollout", q->capacity(), q->peak()});
  run.queues.push_back({"cost", cost_queue.capacity(), cost_queue.peak()});
  return run;
}

/// Fills every lane of a fresh bank using up to `workers` threads. Lanes are
/// disjoint, so the bank equals NoiseSource::next_bank() bit for bit.
inline NoiseBank generate_noise_bank_parallel(NoiseSource& source, std::size_t workers) {
  NoiseBank bank = source.allocate();
  const std::size_t lanes = source.lanes();
  workers = std::clamp<std::size_t>(workers, 1, lanes);
  if (workers == 1) {
    for (std::size_t lane = 0; lane < lanes; ++lane) source.fill_lane(bank, lane);
    return bank;
  }
  detail::FailureLatch failure;
  {
    std::vector<std::jthread> threads;
    for (std::size_t w = 0; w < workers; ++w) {
      threads.emplace_back([&, w] {
        try {
          for (std::size_t lane = w; lane < lanes; lane += workers) source.fill_lane(bank, lane);
        } catch (...) {
          failure.capture();
        }
      });
    }
  }
  failure.rethrow_if_failed();
  return bank;
}

/// Optionally generates the next bank in the background while the current
/// one is consumed. Banks come out in the same order either way.
class NoisePrefetcher {
 public:
  NoisePrefetcher(NoiseSource& source, std::size_t workers, bool prefetch)
      : source_(source), workers_(workers), prefetch_(prefetch) {}

  ~NoisePrefetcher() {
    if (pending_.valid()) pending_.wait();
  }

  NoisePrefetcher(const NoisePrefetcher&) = delete;
  NoisePrefetcher& operator=(const NoisePrefetcher&) = delete;

  NoiseBank next() {
    NoiseBank bank = pending_.valid() ? pending_.get() : generate_noise_bank_parallel(source_, workers_);
    if (prefetch_) {
      pending_ = std::async(std::launch::async, [this] { return generate_noise_bank_parallel(source_, workers_); });
    }
    return bank;
  }

 private:
  NoiseSource& source_;
  std::size_t workers_;
  bool prefetch_;
  std::future<NoiseBank> pending_;
};

}  // namespace mppi
