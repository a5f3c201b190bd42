#pragma once

// Lane-parallel Gaussian noise: xorshift32 uniforms, Box-Muller, and a
// shift-and-add CORDIC path for the transcendental functions it needs.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>
#include <utility>
#include <vector>

#include "mppi/error.hpp"

namespace mppi {

/// 32-bit Marsaglia xorshift with the (13, 17, 5) triple. The state is the
/// output; zero is absorbing and therefore rejected.
class XorShift32 {
 public:
  using result_type = std::uint32_t;

  explicit constexpr XorShift32(std::uint32_t seed) : state_(seed) {
    if (seed == 0) throw Error(ErrorCode::ZeroSeed, "xorshift32 seed must be nonzero");
  }

  static constexpr std::uint32_t advance(std::uint32_t s) noexcept {
    s ^= s << 13;
    s ^= s >> 17;
    s ^= s << 5;
    return s;
  }

  constexpr std::uint32_t operator()() noexcept {
    state_ = advance(state_);
    return state_;
  }

  constexpr std::uint32_t state() const noexcept { return state_; }

  /// Jump ahead by `steps` outputs in O(log steps) using the GF(2) matrix of
  /// the transition.
  void discard(std::uint64_t steps) noexcept;

  static constexpr result_type min() noexcept { return 1; }
  static constexpr result_type max() noexcept { return std::numeric_limits<std::uint32_t>::max(); }

  friend constexpr bool operator==(const XorShift32&, const XorShift32&) = default;

 private:
  std::uint32_t state_;
};

/// Returns the advanced generator together with the value it produced (the
/// two are the same word).
constexpr std::pair<XorShift32, std::uint32_t> xorshift_next(XorShift32 gen) noexcept {
  const std::uint32_t value = gen();
  return {gen, value};
}

namespace detail {

// Column j holds the image of basis vector (1 << j).
using Gf2Matrix = std::array<std::uint32_t, 32>;

inline std::uint32_t gf2_apply(const Gf2Matrix& m, std::uint32_t v) noexcept {
  std::uint32_t out = 0;
  for (int j = 0; v != 0; ++j, v >>= 1) {
    if (v & 1u) out ^= m[j];
  }
  return out;
}

inline Gf2Matrix gf2_compose(const Gf2Matrix& a, const Gf2Matrix& b) noexcept {
  Gf2Matrix out{};
  for (int j = 0; j < 32; ++j) out[j] = gf2_apply(a, b[j]);
  return out;
}

}  // namespace detail

inline void XorShift32::discard(std::uint64_t steps) noexcept {
  detail::Gf2Matrix power{};
  for (int j = 0; j < 32; ++j) power[j] = advance(1u << j);
  std::uint32_t s = state_;
  while (steps != 0) {
    if (steps & 1u) s = detail::gf2_apply(power, s);
    steps >>= 1;
    if (steps != 0) power = detail::gf2_compose(power, power);
  }
  state_ = s;
}

/// Maps a raw word to (0, 1] as (raw + 1) / 2^32.
constexpr double to_open_unit(std::uint32_t raw) noexcept {
  return (static_cast<double>(raw) + 1.0) * 0x1p-32;
}

/// Maps a raw word to [0, 1) as raw / 2^32.
constexpr double to_unit(std::uint32_t raw) noexcept {
  return static_cast<double>(raw) * 0x1p-32;
}

// ---------------------------------------------------------------------------
// CORDIC

/// Iteration count plus the circular-mode scaling constant
/// prod_{i<n} 1/sqrt(1 + 2^-2i). The hyperbolic-mode inverse gain for the
/// same stage count (with the repeated stages) is carried alongside.
class CordicConfig {
 public:
  static constexpr int kMaxIterations = 62;

  explicit CordicConfig(int iterations = 32) : iterations_(iterations) {
    if (iterations < 1 || iterations > kMaxIterations) {
      throw Error(ErrorCode::ConfigError, "cordic iterations must be in [1, 62]");
    }
    gain_ = 1.0;
    for (int i = 0; i < iterations; ++i) gain_ /= std::sqrt(1.0 + std::ldexp(1.0, -2 * i));
    double hyperbolic = 1.0;
    for (int shift : hyperbolic_schedule()) hyperbolic *= std::sqrt(1.0 - std::ldexp(1.0, -2 * shift));
    hyperbolic_inv_gain_ = 1.0 / hyperbolic;
  }

  int iterations() const noexcept { return iterations_; }
  double gain() const noexcept { return gain_; }
  double hyperbolic_inv_gain() const noexcept { return hyperbolic_inv_gain_; }

  /// Shift indices first..first+iterations-1 with 4, 13, 40, ... visited
  /// twice.
  std::vector<int> hyperbolic_schedule(int first = 1) const {
    std::vector<int> shifts;
    int repeat = 4;
    while (repeat < first) repeat = 3 * repeat + 1;
    for (int i = first; i < first + iterations_; ++i) {
      shifts.push_back(i);
      if (i == repeat) {
        shifts.push_back(i);
        repeat = 3 * repeat + 1;
      }
    }
    return shifts;
  }

 private:
  int iterations_;
  double gain_ = 1.0;
  double hyperbolic_inv_gain_ = 1.0;
};

namespace detail {

// Precomputed angle ROMs, as a hardware CORDIC would hold them.
inline const std::array<double, CordicConfig::kMaxIterations + 1>& atan_table() {
  static const auto table = [] {
    std::array<double, CordicConfig::kMaxIterations + 1> t{};
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = std::atan(std::ldexp(1.0, -static_cast<int>(i)));
    return t;
  }();
  return table;
}

// Long enough for a normalised start shift near the bottom of the double
// exponent range plus a full run of stages.
inline constexpr std::size_t kAtanhRomSize = 1200;

inline const std::array<double, kAtanhRomSize>& atanh_table() {
  static const auto table = [] {
    std::array<double, kAtanhRomSize> t{};
    t[0] = std::numeric_limits<double>::infinity();
    for (std::size_t i = 1; i < t.size(); ++i) t[i] = std::atanh(std::ldexp(1.0, -static_cast<int>(i)));
    return t;
  }();
  return table;
}

struct HyperbolicResult {
  double x;
  double z;
};

// Largest shift s >= 1 with |y / x| < 2^-s, from the exponent gap alone.
inline int leading_shift(double x, double y) {
  if (y == 0.0) return 1;
  return std::max(1, std::ilogb(x) - std::ilogb(y) - 1);
}

// Vectoring mode: drives y to zero, z accumulates atanh(y0 / x0). Stages run
// from shift `first`; starting past the leading zeros of y / x keeps the
// residual relative to the result. With `stop_at_zero` the loop ends once y
// is exactly zero, which leaves z exact but x short of the full gain.
inline HyperbolicResult hyperbolic_vectoring(double x, double y, const CordicConfig& cfg, bool stop_at_zero,
                                             int first = 1) {
  const auto& rom = atanh_table();
  double z = 0.0;
  for (int shift : cfg.hyperbolic_schedule(first)) {
    if (stop_at_zero && y == 0.0) break;
    const double d = y < 0.0 ? 1.0 : -1.0;
    const double nx = x + d * std::ldexp(y, -shift);
    const double ny = y + d * std::ldexp(x, -shift);
    z -= d * rom[shift];
    x = nx;
    y = ny;
  }
  return {x, z};
}

}  // namespace detail

struct SinCos {
  double sin;
  double cos;
};

/// Circular-mode rotation after folding theta by whole quarter turns into
/// [-pi/4, pi/4].
inline SinCos cordic_sincos(double theta, const CordicConfig& cfg = CordicConfig{}) {
  if (!std::isfinite(theta)) throw Error(ErrorCode::NonFinite, "cordic_sincos: theta");
  // pi/2 split so n * kHalfPiHi is exact for moderate n.
  constexpr double kHalfPiHi = 1.57079632673412561417e+00;
  constexpr double kHalfPiLo = 6.07710050650619224932e-11;
  const double quarter_turns = std::nearbyint(theta / (std::numbers::pi / 2));
  const double r = (theta - quarter_turns * kHalfPiHi) - quarter_turns * kHalfPiLo;

  const auto& rom = detail::atan_table();
  double x = cfg.gain();
  double y = 0.0;
  double z = r;
  for (int i = 0; i < cfg.iterations(); ++i) {
    const double d = z >= 0.0 ? 1.0 : -1.0;
    const double nx = x - d * std::ldexp(y, -i);
    const double ny = y + d * std::ldexp(x, -i);
    z -= d * rom[i];
    x = nx;
    y = ny;
  }

  const long quadrant = static_cast<long>(std::fmod(quarter_turns, 4.0) + 4.0) % 4;
  switch (quadrant) {
    case 0: return {y, x};
    case 1: return {x, -y};
    case 2: return {-y, -x};
    default: return {-x, y};
  }
}

struct LnSqrt {
  double ln;
  double sqrt;
};

/// Hyperbolic-mode CORDIC for ln x and sqrt x. The mantissa is reduced by
/// powers of two into the convergence interval; the exponent is folded back
/// with ln 2 and a binary shift.
inline LnSqrt cordic_ln_sqrt(double x, const CordicConfig& cfg = CordicConfig{}) {
  if (std::isnan(x) || x <= 0.0) throw Error(ErrorCode::DomainError, "cordic_ln_sqrt: x must be > 0");
  if (!std::isfinite(x)) throw Error(ErrorCode::NonFinite, "cordic_ln_sqrt: x");

  int exponent = 0;
  double mantissa = std::frexp(x, &exponent);  // [0.5, 1)

  // ln: mantissa in [1/sqrt2, sqrt2) so x near 1 keeps a zero exponent.
  double ln_m = mantissa;
  int ln_e = exponent;
  if (ln_m < std::numbers::sqrt2 / 2) {
    ln_m *= 2.0;
    ln_e -= 1;
  }
  const double ln_x0 = ln_m + 1.0;
  const double ln_y0 = ln_m - 1.0;
  const auto ln_run =
      detail::hyperbolic_vectoring(ln_x0, ln_y0, cfg, true, detail::leading_shift(ln_x0, ln_y0));
  const double ln = 2.0 * ln_run.z + ln_e * std::numbers::ln2;

  // sqrt: even exponent, mantissa in [0.5, 2).
  double sq_m = mantissa;
  int sq_e = exponent;
  if (sq_e % 2 != 0) {
    sq_m *= 2.0;
    sq_e -= 1;
  }
  const auto sq_run = detail::hyperbolic_vectoring(sq_m + 0.25, sq_m - 0.25, cfg, false);
  const double root = std::ldexp(sq_run.x * cfg.hyperbolic_inv_gain(), sq_e / 2);
  return {ln, root};
}

// ---------------------------------------------------------------------------
// Box-Muller

enum class TrigBackend { Reference, Cordic };

struct GaussianPair {
  double steer;  // R sin(theta)
  double accel;  // R cos(theta)
};

/// u1 in (0, 1], u2 in [0, 1). The sine leg feeds steering and the cosine leg
/// feeds acceleration.
inline GaussianPair box_muller(double u1, double u2, TrigBackend backend = TrigBackend::Reference,
                               const CordicConfig& cordic = CordicConfig{}) {
  if (!(u1 > 0.0)) throw Error(ErrorCode::DomainError, "box_muller: u1 must be > 0");
  if (!std::isfinite(u1) || !std::isfinite(u2)) throw Error(ErrorCode::NonFinite, "box_muller");
  const double theta = 2.0 * std::numbers::pi * u2;
  if (backend == TrigBackend::Reference) {
    const double radius = std::sqrt(-2.0 * std::log(u1));
    return {radius * std::sin(theta), radius * std::cos(theta)};
  }
  const double log_u1 = cordic_ln_sqrt(u1, cordic).ln;
  const double radius = log_u1 < 0.0 ? cordic_ln_sqrt(-2.0 * log_u1, cordic).sqrt : 0.0;
  const SinCos sc = cordic_sincos(theta, cordic);
  return {radius * sc.sin, radius * sc.cos};
}

// ---------------------------------------------------------------------------
// Noise bank

/// Everything the noise bank is a pure function of.
struct NoiseConfig {
  std::size_t trajectories = 1024;  // K
  std::size_t horizon = 64;         // N
  std::size_t lanes = 8;            // P
  double sigma_steer = 0.25;
  double sigma_accel = 1.0;
  std::uint32_t master_seed = 1;
  TrigBackend backend = TrigBackend::Reference;
  int cordic_iterations = 32;

  void validate() const {
    if (trajectories < 1 || horizon < 1 || lanes < 1) {
      throw Error(ErrorCode::ConfigError, "noise bank needs K >= 1, N >= 1, P >= 1");
    }
    if (lanes > trajectories) throw Error(ErrorCode::ConfigError, "noise bank needs P <= K");
    if (!(sigma_steer >= 0.0) || !(sigma_accel >= 0.0) || !std::isfinite(sigma_steer) ||
        !std::isfinite(sigma_accel)) {
      throw Error(ErrorCode::ConfigError, "noise standard deviations must be finite and >= 0");
    }
    if (master_seed == 0) throw Error(ErrorCode::ZeroSeed, "master seed must be nonzero");
  }
};

/// Per-lane seeds: lane i starts 1 + i * floor((2^32 - 1) / P) steps down the
/// master stream, so lanes walk disjoint stretches of the single period.
inline std::vector<std::uint32_t> lane_seeds(std::uint32_t master_seed, std::size_t lanes) {
  XorShift32 master(master_seed);
  const std::uint64_t stride = 0xFFFFFFFFull / lanes;
  std::vector<std::uint32_t> seeds;
  seeds.reserve(lanes);
  master();
  for (std::size_t i = 0; i < lanes; ++i) {
    seeds.push_back(master.state());
    master.discard(stride);
  }
  return seeds;
}

/// K x N perturbations per control channel, row-major by trajectory.
struct NoiseBank {
  std::size_t trajectories = 0;
  std::size_t horizon = 0;
  std::size_t lanes = 1;
  std::vector<std::uint32_t> seeds;
  std::vector<double> steer;
  std::vector<double> accel;

  std::span<const double> steer_row(std::size_t k) const { return {steer.data() + k * horizon, horizon}; }
  std::span<const double> accel_row(std::size_t k) const { return {accel.data() + k * horizon, horizon}; }
  std::span<double> steer_row(std::size_t k) { return {steer.data() + k * horizon, horizon}; }
  std::span<double> accel_row(std::size_t k) { return {accel.data() + k * horizon, horizon}; }

  friend bool operator==(const NoiseBank&, const NoiseBank&) = default;
};

/// Stateful producer of successive noise banks. Lane p owns generator p and
/// fills trajectories p, p + P, p + 2P, ... in trajectory-major, time-minor
/// order, two draws per Box-Muller pair.
class NoiseSource {
 public:
  explicit NoiseSource(const NoiseConfig& cfg) : cfg_(cfg), cordic_(cfg.cordic_iterations) {
    cfg_.validate();
    seeds_ = lane_seeds(cfg_.master_seed, cfg_.lanes);
    generators_.reserve(seeds_.size());
    for (std::uint32_t seed : seeds_) generators_.emplace_back(seed);
  }

  const NoiseConfig& config() const noexcept { return cfg_; }
  std::size_t lanes() const noexcept { return generators_.size(); }

  NoiseBank allocate() const {
    NoiseBank bank;
    bank.trajectories = cfg_.trajectories;
    bank.horizon = cfg_.horizon;
    bank.lanes = cfg_.lanes;
    bank.seeds = seeds_;
    bank.steer.assign(cfg_.trajectories * cfg_.horizon, 0.0);
    bank.accel.assign(cfg_.trajectories * cfg_.horizon, 0.0);
    return bank;
  }

  /// Fills lane `lane` of `bank` and advances only that lane's generator.
  /// Distinct lanes may be filled concurrently.
  void fill_lane(NoiseBank& bank, std::size_t lane) {
    XorShift32& gen = generators_.at(lane);
    for (std::size_t k = lane; k < cfg_.trajectories; k += cfg_.lanes) {
      auto steer = bank.steer_row(k);
      auto accel = bank.accel_row(k);
      for (std::size_t t = 0; t < cfg_.horizon; ++t) {
        const double u1 = to_open_unit(gen());
        const double u2 = to_unit(gen());
        const GaussianPair g = box_muller(u1, u2, cfg_.backend, cordic_);
        steer[t] = cfg_.sigma_steer * g.steer;
        accel[t] = cfg_.sigma_accel * g.accel;
      }
    }
  }

  NoiseBank next_bank() {
    NoiseBank bank = allocate();
    for (std::size_t lane = 0; lane < cfg_.lanes; ++lane) fill_lane(bank, lane);
    return bank;
  }

 private:
  NoiseConfig cfg_;
  CordicConfig cordic_;
  std::vector<std::uint32_t> seeds_;
  std::vector<XorShift32> generators_;
};

/// First bank of a fresh NoiseSource.
inline NoiseBank generate_noise_bank(const NoiseConfig& cfg) { return NoiseSource(cfg).next_bank(); }

}  // namespace mppi
