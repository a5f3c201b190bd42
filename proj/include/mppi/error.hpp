#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <string_view>

namespace mppi {

enum class ErrorCode {
  ZeroSeed,
  DomainError,
  NonFinite,
  LengthMismatch,
  DimensionMismatch,
  ConfigError,
  EmptyInput,
  DegenerateWeights,
  TrackGenFailure,
  PipelineFailure,
  IoError,
};

constexpr std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::ZeroSeed: return "ZeroSeed";
    case ErrorCode::DomainError: return "DomainError";
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::DegenerateWeights: return "DegenerateWeights";
    case ErrorCode::TrackGenFailure: return "TrackGenFailure";
    case ErrorCode::PipelineFailure: return "PipelineFailure";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

/// Single exception type for the library; callers branch on code().
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

namespace detail {

template <typename... Ts>
inline void require_finite(const char* where, Ts... values) {
  bool ok = true;
  ((ok = ok && std::isfinite(static_cast<double>(values))), ...);
  if (!ok) throw Error(ErrorCode::NonFinite, where);
}

}  // namespace detail
}  // namespace mppi
