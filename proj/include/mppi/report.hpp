#pragma once

// CSV, SVG and console output for benchmark runs.

#include <algorithm>
#include <array>
#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include "mppi/error.hpp"
#include "mppi/sim.hpp"

namespace mppi {

inline constexpr std::array<std::string_view, 9> kSummaryColumns{
    "track_id", "start_index", "repeat", "success", "steps", "avg_error_cm", "max_error_cm", "mean_latency_ms",
    "p99_latency_ms"};

inline constexpr std::array<std::string_view, 16> kStepsColumns{
    "episode_id", "t",     "x",   "y",         "heading",   "speed",     "ref_x",     "ref_y",
    "cross_track_cm", "J_min", "J_mean", "ess", "stage1_ms", "stage2_ms", "stage3_ms", "stage4_ms"};

/// Integers verbatim, bools as 0/1, doubles as the shortest round-trip
/// decimal. Independent of the global locale.
template <class T>
std::string format_number(T v) {
  if constexpr (std::is_same_v<T, bool>) {
    return v ? "1" : "0";
  } else if constexpr (std::is_integral_v<T>) {
    return std::to_string(v);
  } else {
    std::array<char, 32> buf{};
    const auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), static_cast<double>(v));
    if (ec != std::errc{}) return "nan";
    return std::string(buf.data(), end);
  }
}

class CsvWriter {
 public:
  template <std::size_t N>
  CsvWriter(const std::filesystem::path& path, const std::array<std::string_view, N>& header) : path_(path) {
    out_.open(path, std::ios::out | std::ios::trunc);
    if (!out_) throw Error(ErrorCode::IoError, "cannot write " + path.string());
    columns_ = N;
    for (std::size_t i = 0; i < N; ++i) out_ << (i ? "," : "") << header[i];
    out_ << '\n';
  }

  template <class... Ts>
  void row(const Ts&... values) {
    if (sizeof...(Ts) != columns_) throw Error(ErrorCode::DimensionMismatch, "csv row width mismatch in " + path_.string());
    std::size_t i = 0;
    ((out_ << (i++ ? "," : "") << format_number(values)), ...);
    out_ << '\n';
  }

  void close() {
    out_.close();
    if (out_.fail()) throw Error(ErrorCode::IoError, "failed writing " + path_.string());
  }

 private:
  std::filesystem::path path_;
  std::ofstream out_;
  std::size_t columns_ = 0;
};

inline void write_summary_csv(const std::filesystem::path& path, const std::vector<EpisodeRecord>& episodes) {
  CsvWriter csv(path, kSummaryColumns);
  for (const auto& e : episodes) {
    const auto& m = e.metrics;
    csv.row(e.track_id, e.start_index, e.repeat, m.success, m.steps_taken, m.avg_position_error_cm,
            m.max_position_error_cm, mean(m.per_step_latency_ms), percentile(m.per_step_latency_ms, 99.0));
  }
  csv.close();
}

/// Streams per-step rows episode by episode.
class StepsCsv {
 public:
  explicit StepsCsv(const std::filesystem::path& path) : csv_(path, kStepsColumns) {}

  void write(std::size_t episode_id, const EpisodeResult& result) {
    for (const auto& s : result.log) {
      const auto& d = s.diagnostics;
      csv_.row(episode_id, s.t, s.state.x, s.state.y, s.state.heading, s.state.speed, s.ref_x, s.ref_y,
               s.cross_track_cm, d.j_min, d.j_mean, d.ess, d.stage_ms[0], d.stage_ms[1], d.stage_ms[2],
               d.stage_ms[3]);
    }
  }

  void close() { csv_.close(); }

 private:
  CsvWriter csv_;
};

namespace detail {

inline std::vector<Point2> offset_polyline(const Track& track, double offset) {
  std::vector<Point2> out;
  out.reserve(track.centerline.size());
  for (std::size_t i = 0; i < track.centerline.size(); ++i) {
    const double h = track.tangent[i];
    out.push_back({track.centerline[i].x - offset * std::sin(h), track.centerline[i].y + offset * std::cos(h)});
  }
  return out;
}

inline void svg_polyline(std::ostream& os, const std::vector<Point2>& pts, std::string_view style) {
  os << "<polyline " << style << " points=\"";
  char buf[64];
  for (const auto& p : pts) {
    std::snprintf(buf, sizeof buf, "%.3f,%.3f ", p.x, -p.y);
    os << buf;
  }
  os << "\"/>\n";
}

}  // namespace detail

/// Centerline, boundaries at +-half_width, driven paths and start markers.
/// World y points up; SVG y is flipped.
inline std::string render_track_svg(const Track& track, const std::vector<const std::vector<Point2>*>& paths,
                                    const std::vector<std::size_t>& starts) {
  const auto inner = detail::offset_polyline(track, track.half_width);
  const auto outer = detail::offset_polyline(track, -track.half_width);
  double lo_x = std::numeric_limits<double>::infinity(), hi_x = -lo_x, lo_y = lo_x, hi_y = -lo_x;
  auto extend = [&](const std::vector<Point2>& pts) {
    for (const auto& p : pts) {
      lo_x = std::min(lo_x, p.x);
      hi_x = std::max(hi_x, p.x);
      lo_y = std::min(lo_y, -p.y);
      hi_y = std::max(hi_y, -p.y);
    }
  };
  extend(inner);
  extend(outer);
  for (const auto* path : paths) extend(*path);
  const double pad = 2.0;

  std::ostringstream os;
  char buf[160];
  std::snprintf(buf, sizeof buf,
                "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"%.3f %.3f %.3f %.3f\" width=\"800\" height=\"800\">\n",
                lo_x - pad, lo_y - pad, hi_x - lo_x + 2 * pad, hi_y - lo_y + 2 * pad);
  os << buf;
  os << "<title>track " << track.track_id << "</title>\n";
  os << "<rect x=\"" << lo_x - pad << "\" y=\"" << lo_y - pad << "\" width=\"" << hi_x - lo_x + 2 * pad
     << "\" height=\"" << hi_y - lo_y + 2 * pad << "\" fill=\"white\"/>\n";
  detail::svg_polyline(os, inner, "class=\"boundary\" fill=\"none\" stroke=\"#444\" stroke-width=\"0.25\"");
  detail::svg_polyline(os, outer, "class=\"boundary\" fill=\"none\" stroke=\"#444\" stroke-width=\"0.25\"");
  detail::svg_polyline(os, track.centerline,
                       "class=\"centerline\" fill=\"none\" stroke=\"#999\" stroke-width=\"0.15\" stroke-dasharray=\"1 1\"");
  for (const auto* path : paths) {
    if (path->size() < 2) continue;
    detail::svg_polyline(os, *path, "class=\"driven\" fill=\"none\" stroke=\"#d33\" stroke-width=\"0.12\" opacity=\"0.6\"");
  }
  for (std::size_t s : starts) {
    const auto st = start_state(track, s);
    std::snprintf(buf, sizeof buf, "<circle class=\"start\" cx=\"%.3f\" cy=\"%.3f\" r=\"0.8\" fill=\"#27c\"/>\n", st.x,
                  -st.y);
    os << buf;
  }
  os << "</svg>\n";
  return os.str();
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::out | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << text;
  out.close();
  if (out.fail()) throw Error(ErrorCode::IoError, "failed writing " + path.string());
}

/// Fixed-width per-track table plus an "all" row.
inline std::string format_aggregate_table(const BenchmarkResult& result) {
  std::ostringstream os;
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-6s %8s %9s %11s %13s %12s %12s\n", "track", "episodes", "success", "error_cm",
                "mean_lat_ms", "p50_lat_ms", "p99_lat_ms");
  os << buf;
  auto line = [&](const AggregateRow& r) {
    const std::string id = r.track_id < 0 ? "all" : std::to_string(r.track_id);
    std::snprintf(buf, sizeof buf, "%-6s %8zu %8.1f%% %11.2f %13.3f %12.3f %12.3f\n", id.c_str(), r.episodes,
                  100.0 * r.success_rate, r.mean_error_cm, r.mean_latency_ms, r.p50_latency_ms, r.p99_latency_ms);
    os << buf;
  };
  for (const auto& r : result.per_track) line(r);
  line(result.overall);
  return os.str();
}

}  // namespace mppi
