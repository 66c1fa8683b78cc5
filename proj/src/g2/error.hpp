#pragma once

#include <stdexcept>
#include <string>

namespace g2 {

enum class ErrorCode {
  InvalidArgument = 1,
  DegenerateForm,
  MetricNotPositive,
  AsymmetricH,
  NotClosed,
  StepFailure,
  InsufficientDynamicRange,
  NotNormalized,
  NonConvergence,
  TrajectoryGap,
  UnresolvableRadius,
  NoAdmissibleBalls,
  ParseError,
  UnknownKey,
  DuplicateKey,
  Io,
};

const char* error_code_name(ErrorCode code);

/// Base exception for every domain failure raised by the library.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

/// Raised with the flat index of the grid point where a pointwise check failed.
class PointError : public Error {
 public:
  PointError(ErrorCode code, const std::string& what, std::size_t point)
      : Error(code, what + " at point " + std::to_string(point)), point_(point) {}
  std::size_t point() const { return point_; }

 private:
  std::size_t point_;
};

/// Configuration errors carry the 1-based line they refer to (0 if none).
class ConfigError : public Error {
 public:
  ConfigError(ErrorCode code, int line, const std::string& what)
      : Error(code, line > 0 ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

}  // namespace g2
