#pragma once

#include <complex>
#include <stdexcept>
#include <string>

namespace fdiff {

using cplx = std::complex<double>;

inline constexpr double kPi = 3.14159265358979323846;

/// Scenario or parameter validation failure (CLI exit code 2).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Requested solver cannot handle the configured regime/quantization
/// (CLI exit code 3).
struct SolverMismatchError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Norm drift, step underflow or other numerical breakdown
/// (CLI exit code 4).
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace fdiff
