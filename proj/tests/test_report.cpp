#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <string>

#include "mppi/bench.hpp"
#include "mppi/report.hpp"
#include "mppi/selftest.hpp"

namespace {

using namespace mppi;
namespace fs = std::filesystem;

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  return {std::istreambuf_iterator<char>(in), {}};
}

fs::path scratch_dir(const char* name) {
  const auto dir = fs::temp_directory_path() / (std::string("mppi_test_") + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

TEST(Report, NumberFormatting) {
  EXPECT_EQ(format_number(0.1), "0.1");
  EXPECT_EQ(format_number(1.0 / 3.0), "0.3333333333333333");
  EXPECT_EQ(format_number(std::size_t{42}), "42");
  EXPECT_EQ(format_number(-3), "-3");
  EXPECT_EQ(format_number(true), "1");
  EXPECT_EQ(std::stod(format_number(2.0 / 7.0)), 2.0 / 7.0);
}

TEST(Report, CsvRowWidthChecked) {
  const auto dir = scratch_dir("csv");
  CsvWriter csv(dir / "a.csv", std::array<std::string_view, 2>{"a", "b"});
  csv.row(1, 2.5);
  EXPECT_THROW(csv.row(1), Error);
  csv.close();
  EXPECT_EQ(slurp(dir / "a.csv"), "a,b\n1,2.5\n");
}

TEST(Report, UnwritablePathIsIoError) {
  try {
    write_text_file("/nonexistent/dir/x.svg", "x");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::IoError);
  }
}

TEST(Report, SummaryRows) {
  EpisodeRecord e;
  e.track_id = 2;
  e.start_index = 7;
  e.repeat = 1;
  e.metrics.success = true;
  e.metrics.steps_taken = 3;
  e.metrics.avg_position_error_cm = 1.5;
  e.metrics.max_position_error_cm = 4.0;
  e.metrics.per_step_latency_ms = {1.0, 2.0, 3.0};
  const auto dir = scratch_dir("summary");
  write_summary_csv(dir / "summary.csv", {e});
  EXPECT_EQ(slurp(dir / "summary.csv"),
            "track_id,start_index,repeat,success,steps,avg_error_cm,max_error_cm,mean_latency_ms,p99_latency_ms\n"
            "2,7,1,1,3,1.5,4,2,3\n");
}

TEST(Report, SvgHasAllLayers) {
  const auto track = generate_track(11, TrackParams{});
  const std::vector<Point2> path{{1, 2}, {3, 4}, {5, 6}};
  const auto svg = render_track_svg(track, {&path}, {0, 5});
  EXPECT_EQ(svg.rfind("<svg", 0), 0u);
  EXPECT_NE(svg.find("class=\"centerline\""), std::string::npos);
  std::size_t boundaries = 0;
  for (auto pos = svg.find("class=\"boundary\""); pos != std::string::npos; pos = svg.find("class=\"boundary\"", pos + 1)) {
    ++boundaries;
  }
  EXPECT_EQ(boundaries, 2u);
  EXPECT_NE(svg.find("class=\"driven\""), std::string::npos);
  EXPECT_NE(svg.find("class=\"start\""), std::string::npos);
  EXPECT_NE(svg.find("</svg>"), std::string::npos);
}

TEST(Report, AggregateTableHasRowPerTrackAndTotal) {
  BenchmarkResult r;
  r.per_track = {{0, 2, 1.0, 3.0, 1.0, 1.0, 2.0}, {1, 2, 0.5, 5.0, 1.0, 1.0, 2.0}};
  r.overall = {-1, 4, 0.75, 4.0, 1.0, 1.0, 2.0};
  const auto table = format_aggregate_table(r);
  EXPECT_EQ(std::count(table.begin(), table.end(), '\n'), 4);
  EXPECT_NE(table.find("75.0%"), std::string::npos);
  EXPECT_NE(table.find("all"), std::string::npos);
}

TEST(Bench, NonTimingColumnsRepeatable) {
  ExperimentConfig cfg;
  cfg.solver.N = 16;
  cfg.bench.steps = 5;
  cfg.bench.warmup = 2;
  cfg.bench.sweep = {{32, 1}, {32, 4}};
  const auto a = run_latency_sweep(cfg);
  const auto b = run_latency_sweep(cfg);
  ASSERT_EQ(a.size(), 2u);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].K, b[i].K);
    EXPECT_EQ(a[i].P, b[i].P);
    EXPECT_EQ(a[i].final_state, b[i].final_state);
    EXPECT_GT(a[i].mean_ms, 0.0);
    EXPECT_LE(a[i].median_ms, a[i].p99_ms);
  }
  const auto dir = scratch_dir("latency");
  write_latency_csv(dir / "latency.csv", a);
  EXPECT_EQ(slurp(dir / "latency.csv").substr(0, 30), "K,P,steps,warmup,mean_ms,media");
}

TEST(Selftest, OracleMatchesTreeReduceAndAllPropertiesPass) {
  for (std::size_t n : {1u, 2u, 3u, 5u, 8u, 100u}) {
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = 1.0 / (i + 3);
    EXPECT_EQ(selftest::padded_pairwise(v), tree_reduce(v));
  }
  const auto results = run_selftest();
  ASSERT_EQ(results.size(), 4u);
  for (const auto& r : results) EXPECT_TRUE(r.passed) << r.name << ": " << r.detail;
}

}  // namespace
