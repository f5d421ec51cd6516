#pragma once

#include <stdexcept>
#include <string>

namespace covspec {

/// Invalid tuning or command-line configuration.
class ConfigError : public std::invalid_argument {
 public:
  explicit ConfigError(const std::string& what) : std::invalid_argument(what) {}
};

/// Input data that violates the dataset invariants (ragged rows, degenerate
/// covariates, series too short, non-finite values).
class DataError : public std::invalid_argument {
 public:
  explicit DataError(const std::string& what) : std::invalid_argument(what) {}
};

/// File-system failures: unreadable input, unwritable output, truncated or
/// corrupted chain files.
class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace covspec
