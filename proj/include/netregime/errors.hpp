#pragma once

#include <stdexcept>
#include <string>

namespace netregime {

// Exit codes for the CLI: 0 success, 1 validation error, 2 numerical
// failure, 3 I/O error.
enum ExitCode : int {
  kExitOk = 0,
  kExitValidation = 1,
  kExitNumerical = 2,
  kExitIo = 3,
};

/// Bad input data or configuration (malformed records, invariant violations).
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

/// Numerical failure (singular covariance, degenerate filter, non-finite result).
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

/// Filesystem / serialization failure.
class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace netregime
