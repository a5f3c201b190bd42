// mppi: run the closed-loop benchmark, sweep solver latency, or self-test.
//
// Exit codes: 0 ok, 1 self-test failure, 2 bad configuration or usage,
// 3 I/O failure, 4 any other runtime error.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>

#include "mppi/mppi.hpp"

namespace {

namespace fs = std::filesystem;

enum Exit : int { kOk = 0, kSelftestFailed = 1, kConfig = 2, kIo = 3, kRuntime = 4 };

struct Options {
  std::string config_path;
  std::string output_dir;
  std::optional<std::uint32_t> seed;
  std::optional<std::size_t> repeats;
  std::string sweep;
  bool quiet = false;
};

std::vector<mppi::LatencySweepPoint> parse_sweep(const std::string& text) {
  std::vector<mppi::LatencySweepPoint> points;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto colon = item.find(':');
    if (colon == std::string::npos) throw mppi::Error(mppi::ErrorCode::ConfigError, "--sweep: expected K:P, got " + item);
    try {
      std::size_t used = 0;
      const auto K = std::stoul(item.substr(0, colon), &used);
      if (used != colon) throw std::invalid_argument(item);
      const auto P = std::stoul(item.substr(colon + 1), &used);
      if (used != item.size() - colon - 1) throw std::invalid_argument(item);
      points.push_back({K, P});
    } catch (const std::logic_error&) {
      throw mppi::Error(mppi::ErrorCode::ConfigError, "--sweep: expected K:P, got " + item);
    }
  }
  if (points.empty()) throw mppi::Error(mppi::ErrorCode::ConfigError, "--sweep: empty");
  return points;
}

mppi::ExperimentConfig resolve_config(const Options& opt) {
  mppi::ExperimentConfig cfg = opt.config_path.empty() ? mppi::ExperimentConfig{} : mppi::load_config(opt.config_path);
  if (!opt.output_dir.empty()) cfg.output_dir = opt.output_dir;
  if (opt.seed) cfg.solver.master_seed = *opt.seed;
  if (opt.repeats) cfg.sim.repeats = *opt.repeats;
  if (!opt.sweep.empty()) cfg.bench.sweep = parse_sweep(opt.sweep);
  cfg.validate();
  return cfg;
}

fs::path prepare_output(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw mppi::Error(mppi::ErrorCode::IoError, "cannot create output directory " + dir + ": " + ec.message());
  return dir;
}

std::string host_line() {
  return "host: " + std::to_string(std::thread::hardware_concurrency()) + " hardware threads";
}

int cmd_run(const Options& opt) {
  const auto cfg = resolve_config(opt);
  const fs::path out = prepare_output(cfg.output_dir);
  const auto suite = cfg.suite();

  mppi::StepsCsv steps(out / "steps.csv");
  std::size_t episode_id = 0;
  const std::size_t total = suite.track_seeds.size() * suite.starts().size() * suite.repeats;
  const auto result = mppi::run_benchmark(suite, [&](const mppi::EpisodeRecord& rec, const mppi::EpisodeResult& ep) {
    if (cfg.sim.log_steps) steps.write(episode_id, ep);
    ++episode_id;
    if (!opt.quiet) {
      std::printf("[%zu/%zu] track %d start %zu repeat %zu: %s, %zu steps, avg %.1f cm, max %.1f cm\n", episode_id,
                  total, rec.track_id, rec.start_index, rec.repeat, rec.metrics.success ? "success" : "fail",
                  rec.metrics.steps_taken, rec.metrics.avg_position_error_cm, rec.metrics.max_position_error_cm);
      std::fflush(stdout);
    }
  });
  steps.close();
  mppi::write_summary_csv(out / "summary.csv", result.episodes);

  for (const auto& track : result.tracks) {
    std::vector<const std::vector<mppi::Point2>*> paths;
    for (const auto& e : result.episodes) {
      if (e.track_id == track.track_id && e.repeat == 0) paths.push_back(&e.path);
    }
    mppi::write_text_file(out / ("track_" + std::to_string(track.track_id) + ".svg"),
                          mppi::render_track_svg(track, paths, suite.starts()));
  }

  std::cout << mppi::format_aggregate_table(result);
  if (!opt.quiet) std::cout << host_line() << "\nwrote " << out.string() << "\n";
  return kOk;
}

int cmd_bench_latency(const Options& opt) {
  const auto cfg = resolve_config(opt);
  const fs::path out = prepare_output(cfg.output_dir);
  const auto rows = mppi::run_latency_sweep(cfg);
  mppi::write_latency_csv(out / "latency.csv", rows);

  std::printf("%8s %4s %6s %10s %10s %10s\n", "K", "P", "steps", "mean_ms", "median_ms", "p99_ms");
  for (const auto& r : rows) {
    std::printf("%8zu %4zu %6zu %10.3f %10.3f %10.3f\n", r.K, r.P, r.steps, r.mean_ms, r.median_ms, r.p99_ms);
  }
  std::cout << host_line() << "\n";
  for (const auto& a : rows) {
    for (const auto& b : rows) {
      if (a.K == b.K && a.P == 1 && b.P > 1 && a.mean_ms > 0.0) {
        std::printf("K=%zu: P=%zu / P=1 mean latency ratio %.3f\n", a.K, b.P, b.mean_ms / a.mean_ms);
      }
    }
  }
  if (!opt.quiet) std::cout << "wrote " << (out / "latency.csv").string() << "\n";
  return kOk;
}

int cmd_selftest(const Options& opt) {
  const auto results = mppi::run_selftest();
  for (const auto& r : results) {
    if (r.passed) {
      if (!opt.quiet) std::printf("PASS %-26s %.2f s\n", r.name.c_str(), r.seconds);
    } else {
      std::fprintf(stderr, "FAIL %s: %s\n", r.name.c_str(), r.detail.c_str());
      std::printf("FAIL %s\n", r.name.c_str());
      return kSelftestFailed;
    }
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"MPPI controller: closed-loop benchmark, latency sweep and self-test"};
  app.require_subcommand(1);
  app.fallthrough();

  Options opt;
  app.add_option("--config", opt.config_path, "Experiment config (JSON); built-in defaults when omitted");
  app.add_option("--output", opt.output_dir, "Output directory (overrides output_dir)");
  app.add_option("--seed", opt.seed, "Master seed (overrides seeds.master)");
  app.add_option("--repeats", opt.repeats, "Repeats per start (overrides sim.repeats)");
  app.add_flag("--quiet", opt.quiet, "Only print the final table");

  auto* run = app.add_subcommand("run", "Run the closed-loop benchmark and write CSV/SVG artifacts");
  auto* bench = app.add_subcommand("bench-latency", "Time mppi_step over a (K, P) sweep");
  bench->add_option("--sweep", opt.sweep, "Comma-separated K:P pairs, e.g. 1024:1,1024:8");
  auto* self = app.add_subcommand("selftest", "Run the fast invariant suite");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfig;
  }

  try {
    if (run->parsed()) return cmd_run(opt);
    if (bench->parsed()) return cmd_bench_latency(opt);
    if (self->parsed()) return cmd_selftest(opt);
  } catch (const mppi::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    switch (e.code()) {
      case mppi::ErrorCode::ConfigError:
      case mppi::ErrorCode::ZeroSeed:
        return kConfig;
      case mppi::ErrorCode::IoError:
        return kIo;
      default:
        return kRuntime;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntime;
  }
  return kConfig;
}
