#pragma once

#include <stdexcept>
#include <string>

namespace survacc {

// Raised when a request leaves the regime where the first-order expansion
// holds: times at or past the variance pole, or first-order decay rates
// that are not positive.
class ValidityError : public std::domain_error {
 public:
  explicit ValidityError(const std::string& what) : std::domain_error(what) {}
};

// Malformed or inconsistent run configuration.
class ConfigError : public std::invalid_argument {
 public:
  explicit ConfigError(const std::string& what) : std::invalid_argument(what) {}
};

// Process exit codes used by the command-line tool.
enum ExitCode : int {
  kExitOk = 0,
  kExitInternal = 1,
  kExitConfig = 2,
  kExitValidity = 3,
  kExitGateFailure = 4,
};

}  // namespace survacc
