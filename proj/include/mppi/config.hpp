#pragma once

// Experiment configuration: one JSON document describes a whole run.
// Unknown keys and type mismatches are rejected with the dotted field path;
// missing keys keep their defaults.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include <json.hpp>

#include "mppi/cost.hpp"
#include "mppi/error.hpp"
#include "mppi/model.hpp"
#include "mppi/sim.hpp"
#include "mppi/solver.hpp"

namespace mppi {

struct SimConfig {
  TrackParams track;
  double target_speed = 6.0;
  EpisodeLimits limits;
  std::vector<std::size_t> starts;  // empty: all start points
  std::size_t repeats = 20;
  double plant_wheelbase_scale = 1.0;
  bool log_steps = true;

  void validate() const {
    track.validate();
    if (!(target_speed >= 0.0) || !std::isfinite(target_speed)) {
      throw Error(ErrorCode::ConfigError, "sim.target_speed must be finite and >= 0");
    }
    if (!(limits.fail_distance > 0.0)) throw Error(ErrorCode::ConfigError, "sim.fail_distance must be > 0");
    for (std::size_t s : starts) {
      if (s >= kStartPoints) throw Error(ErrorCode::ConfigError, "sim.starts entries must be in [0, 11)");
    }
    if (repeats < 1) throw Error(ErrorCode::ConfigError, "sim.repeats must be >= 1");
    if (!(plant_wheelbase_scale > 0.0) || !std::isfinite(plant_wheelbase_scale)) {
      throw Error(ErrorCode::ConfigError, "sim.plant_wheelbase_scale must be > 0");
    }
  }

  friend bool operator==(const SimConfig&, const SimConfig&) = default;
};

struct LatencySweepPoint {
  std::size_t K = 1024;
  std::size_t P = 1;

  friend bool operator==(const LatencySweepPoint&, const LatencySweepPoint&) = default;
};

struct BenchConfig {
  std::vector<LatencySweepPoint> sweep{{1024, 1}, {1024, 8}};
  std::size_t steps = 100;
  std::size_t warmup = 10;

  void validate() const {
    if (sweep.empty()) throw Error(ErrorCode::ConfigError, "bench.sweep must be nonempty");
    for (const auto& p : sweep) {
      if (p.K < 1 || p.P < 1 || p.P > p.K) throw Error(ErrorCode::ConfigError, "bench.sweep entries need 1 <= P <= K");
    }
    if (steps < 1) throw Error(ErrorCode::ConfigError, "bench.steps must be >= 1");
  }

  friend bool operator==(const BenchConfig&, const BenchConfig&) = default;
};

struct ExperimentConfig {
  SolverConfig solver;  // solver.master_seed is stored under seeds.master
  CostWeights cost;
  ModelParams model;
  SimConfig sim;
  BenchConfig bench;
  std::string output_dir = "out";
  std::vector<std::uint32_t> track_seeds{11, 22, 33, 44, 55};

  void validate() const {
    solver.validate();
    cost.validate();
    model.validate();
    sim.validate();
    bench.validate();
    if (track_seeds.empty()) throw Error(ErrorCode::ConfigError, "seeds.tracks must be nonempty");
    for (auto s : track_seeds) {
      if (s == 0) throw Error(ErrorCode::ConfigError, "seeds.tracks entries must be nonzero");
    }
  }

  SuiteConfig suite() const {
    SuiteConfig s;
    s.solver = solver;
    s.weights = cost;
    s.model = model;
    s.track = sim.track;
    s.track_seeds = track_seeds;
    s.start_indices = sim.starts;
    s.repeats = sim.repeats;
    s.target_speed = sim.target_speed;
    s.limits = sim.limits;
    s.plant_wheelbase_scale = sim.plant_wheelbase_scale;
    return s;
  }

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

namespace detail {

using nlohmann::json;

inline const char* json_type(const json& j) {
  if (j.is_number_unsigned()) return "unsigned integer";
  if (j.is_number_integer()) return "integer";
  return j.type_name();
}

class ObjectReader {
 public:
  ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail(path_, std::string("expected an object, got ") + json_type(j_));
  }

  template <class T>
  void read(const char* key, T& out) {
    used_.insert(key);
    if (auto it = j_.find(key); it != j_.end()) convert(*it, field(key), out);
  }

  template <class F>
  void section(const char* key, F&& body) {
    used_.insert(key);
    if (auto it = j_.find(key); it != j_.end()) {
      ObjectReader sub(*it, field(key));
      body(sub);
      sub.finish();
    }
  }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!used_.count(key)) fail(field(key.c_str()), "unknown key");
    }
  }

  [[noreturn]] static void fail(const std::string& path, const std::string& what) {
    throw Error(ErrorCode::ConfigError, path + ": " + what);
  }

 private:
  std::string field(const char* key) const { return path_.empty() ? key : path_ + "." + key; }

  static void convert(const json& v, const std::string& path, bool& out) {
    if (!v.is_boolean()) fail(path, std::string("expected boolean, got ") + json_type(v));
    out = v.get<bool>();
  }

  static void convert(const json& v, const std::string& path, double& out) {
    if (!v.is_number()) fail(path, std::string("expected number, got ") + json_type(v));
    out = v.get<double>();
  }

  template <class T>
    requires std::is_integral_v<T> && std::is_unsigned_v<T>
  static void convert(const json& v, const std::string& path, T& out) {
    if (!v.is_number_unsigned()) fail(path, std::string("expected non-negative integer, got ") + json_type(v));
    const auto raw = v.get<std::uint64_t>();
    if (raw > std::numeric_limits<T>::max()) fail(path, "value out of range");
    out = static_cast<T>(raw);
  }

  static void convert(const json& v, const std::string& path, int& out) {
    if (!v.is_number_integer()) fail(path, std::string("expected integer, got ") + json_type(v));
    const auto raw = v.get<std::int64_t>();
    if (raw < std::numeric_limits<int>::min() || raw > std::numeric_limits<int>::max()) fail(path, "value out of range");
    out = static_cast<int>(raw);
  }

  static void convert(const json& v, const std::string& path, std::string& out) {
    if (!v.is_string()) fail(path, std::string("expected string, got ") + json_type(v));
    out = v.get<std::string>();
  }

  template <class T, std::size_t N>
  static void convert(const json& v, const std::string& path, std::array<T, N>& out) {
    if (!v.is_array() || v.size() != N) fail(path, "expected an array of " + std::to_string(N) + " numbers");
    for (std::size_t i = 0; i < N; ++i) convert(v[i], path + "[" + std::to_string(i) + "]", out[i]);
  }

  template <class T>
  static void convert(const json& v, const std::string& path, std::vector<T>& out) {
    if (!v.is_array()) fail(path, std::string("expected array, got ") + json_type(v));
    std::vector<T> values(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) convert(v[i], path + "[" + std::to_string(i) + "]", values[i]);
    out = std::move(values);
  }

  static void convert(const json& v, const std::string& path, ControlInput& out) {
    ObjectReader r(v, path);
    r.read("steer", out.steer);
    r.read("accel", out.accel);
    r.finish();
  }

  static void convert(const json& v, const std::string& path, TrigBackend& out) {
    std::string name;
    convert(v, path, name);
    if (name == "reference") {
      out = TrigBackend::Reference;
    } else if (name == "cordic") {
      out = TrigBackend::Cordic;
    } else {
      fail(path, "expected \"reference\" or \"cordic\"");
    }
  }

  static void convert(const json& v, const std::string& path, LatencySweepPoint& out) {
    std::array<std::size_t, 2> kp{};
    convert(v, path, kp);
    out = {kp[0], kp[1]};
  }

  const json& j_;
  std::string path_;
  std::set<std::string> used_;
};

inline const char* backend_name(TrigBackend b) { return b == TrigBackend::Cordic ? "cordic" : "reference"; }

}  // namespace detail

/// Parses and validates. Throws Error(ConfigError) naming the field, or the
/// line and column for malformed JSON.
inline ExperimentConfig parse_config(const std::string& text) {
  using nlohmann::json;
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    const std::size_t offset = std::min<std::size_t>(e.byte == 0 ? 0 : e.byte - 1, text.size());
    std::size_t line = 1, column = 1;
    for (std::size_t i = 0; i < offset; ++i) {
      if (text[i] == '\n') {
        ++line;
        column = 1;
      } else {
        ++column;
      }
    }
    throw Error(ErrorCode::ConfigError,
                "line " + std::to_string(line) + ", column " + std::to_string(column) + ": malformed JSON");
  }

  ExperimentConfig cfg;
  detail::ObjectReader top(root, "");
  top.section("solver", [&](detail::ObjectReader& r) {
    auto& s = cfg.solver;
    r.read("K", s.K);
    r.read("N", s.N);
    r.read("lambda", s.lambda);
    r.read("sigma_u", s.sigma_u);
    r.read("max_iters", s.max_iters);
    r.read("P", s.P);
    r.read("smoothing_beta", s.smoothing_beta);
    r.read("u_init", s.u_init);
    r.read("queue_depth", s.queue_depth);
    r.read("noise_lanes", s.noise_lanes);
    r.read("prefetch_noise", s.prefetch_noise);
    r.read("trig_backend", s.trig_backend);
  });
  top.section("cost", [&](detail::ObjectReader& r) {
    r.read("Q", cfg.cost.Q);
    r.read("R", cfg.cost.R);
    r.read("Qf", cfg.cost.Qf);
  });
  top.section("model", [&](detail::ObjectReader& r) {
    auto& m = cfg.model;
    r.read("wheelbase", m.wheelbase);
    r.read("dt", m.dt);
    r.read("steer_limit", m.steer_limit);
    r.read("accel_min", m.accel_min);
    r.read("accel_max", m.accel_max);
    r.read("speed_max", m.speed_max);
  });
  top.section("sim", [&](detail::ObjectReader& r) {
    auto& s = cfg.sim;
    r.section("track", [&](detail::ObjectReader& t) {
      t.read("r0", s.track.r0);
      t.read("half_width", s.track.half_width);
      t.read("harmonics", s.track.harmonics);
      t.read("waypoints", s.track.waypoints);
      t.read("amplitude_scale", s.track.amplitude_scale);
      t.read("max_attempts", s.track.max_attempts);
    });
    r.read("target_speed", s.target_speed);
    r.read("fail_distance", s.limits.fail_distance);
    r.read("max_steps", s.limits.max_steps);
    r.read("starts", s.starts);
    r.read("repeats", s.repeats);
    r.read("plant_wheelbase_scale", s.plant_wheelbase_scale);
    r.read("log_steps", s.log_steps);
  });
  top.section("bench", [&](detail::ObjectReader& r) {
    r.read("sweep", cfg.bench.sweep);
    r.read("steps", cfg.bench.steps);
    r.read("warmup", cfg.bench.warmup);
  });
  top.read("output_dir", cfg.output_dir);
  top.section("seeds", [&](detail::ObjectReader& r) {
    r.read("master", cfg.solver.master_seed);
    r.read("tracks", cfg.track_seeds);
  });
  top.finish();
  cfg.validate();
  return cfg;
}

inline nlohmann::json to_json(const ExperimentConfig& cfg) {
  using nlohmann::json;
  const auto& s = cfg.solver;
  json sweep = json::array();
  for (const auto& p : cfg.bench.sweep) sweep.push_back({p.K, p.P});
  return json{
      {"solver",
       {{"K", s.K},
        {"N", s.N},
        {"lambda", s.lambda},
        {"sigma_u", s.sigma_u},
        {"max_iters", s.max_iters},
        {"P", s.P},
        {"smoothing_beta", s.smoothing_beta},
        {"u_init", {{"steer", s.u_init.steer}, {"accel", s.u_init.accel}}},
        {"queue_depth", s.queue_depth},
        {"noise_lanes", s.noise_lanes},
        {"prefetch_noise", s.prefetch_noise},
        {"trig_backend", detail::backend_name(s.trig_backend)}}},
      {"cost", {{"Q", cfg.cost.Q}, {"R", cfg.cost.R}, {"Qf", cfg.cost.Qf}}},
      {"model",
       {{"wheelbase", cfg.model.wheelbase},
        {"dt", cfg.model.dt},
        {"steer_limit", cfg.model.steer_limit},
        {"accel_min", cfg.model.accel_min},
        {"accel_max", cfg.model.accel_max},
        {"speed_max", cfg.model.speed_max}}},
      {"sim",
       {{"track",
         {{"r0", cfg.sim.track.r0},
          {"half_width", cfg.sim.track.half_width},
          {"harmonics", cfg.sim.track.harmonics},
          {"waypoints", cfg.sim.track.waypoints},
          {"amplitude_scale", cfg.sim.track.amplitude_scale},
          {"max_attempts", cfg.sim.track.max_attempts}}},
        {"target_speed", cfg.sim.target_speed},
        {"fail_distance", cfg.sim.limits.fail_distance},
        {"max_steps", cfg.sim.limits.max_steps},
        {"starts", cfg.sim.starts},
        {"repeats", cfg.sim.repeats},
        {"plant_wheelbase_scale", cfg.sim.plant_wheelbase_scale},
        {"log_steps", cfg.sim.log_steps}}},
      {"bench", {{"sweep", sweep}, {"steps", cfg.bench.steps}, {"warmup", cfg.bench.warmup}}},
      {"output_dir", cfg.output_dir},
      {"seeds", {{"master", s.master_seed}, {"tracks", cfg.track_seeds}}},
  };
}

inline std::string serialize_config(const ExperimentConfig& cfg) { return to_json(cfg).dump(2) + "\n"; }

/// Reads `path`; a missing or unreadable file is an IoError.
inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open config file " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  if (in.bad()) throw Error(ErrorCode::IoError, "cannot read config file " + path.string());
  return parse_config(text.str());
}

}  // namespace mppi
