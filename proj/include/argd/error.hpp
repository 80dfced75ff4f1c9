#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace argd {

/// Coarse error category; the CLI maps these onto process exit codes.
enum class ErrorCode {
  invalid_argument,  // violated precondition: bad dimensions, bounds, thresholds
  numeric,           // divergence, non-convergence, nonfinite values
  io,                // filesystem failures
  format,            // bad magic, truncated or malformed files
  internal,          // broken internal invariant
};

class Error : public std::runtime_error {
public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

private:
  ErrorCode code_;
};

/// A QR input had a numerically dependent column. Carries the offending
/// column index so callers can retry with a fresh sketch.
class RankDeficientError : public Error {
public:
  RankDeficientError(std::size_t column, const std::string& message)
      : Error(ErrorCode::numeric, message), column_(column) {}

  std::size_t column() const noexcept { return column_; }

private:
  std::size_t column_;
};

}  // namespace argd
