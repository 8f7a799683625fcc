#pragma once

#include <stdexcept>
#include <string>

// Error taxonomy. Each class carries the process exit code the CLI maps it to.

namespace fluxkit {

struct UsageError : std::runtime_error {
  static constexpr int exit_code = 2;
  explicit UsageError(const std::string& msg) : std::runtime_error(msg) {}
};

struct ParseError : std::runtime_error {
  static constexpr int exit_code = 3;
  explicit ParseError(const std::string& msg) : std::runtime_error(msg) {}
};

// Numerical result did not pass its internal consistency gate.
struct ConvergenceError : std::runtime_error {
  static constexpr int exit_code = 4;
  explicit ConvergenceError(const std::string& msg) : std::runtime_error(msg) {}
};

struct FitError : std::runtime_error {
  static constexpr int exit_code = 4;
  explicit FitError(const std::string& msg) : std::runtime_error(msg) {}
};

// Input data violates a documented requirement of the operation.
struct PreconditionError : std::runtime_error {
  static constexpr int exit_code = 5;
  explicit PreconditionError(const std::string& msg) : std::runtime_error(msg) {}
};

// Data lies outside the regime where the model applies.
struct RegimeError : std::runtime_error {
  static constexpr int exit_code = 5;
  explicit RegimeError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace fluxkit
