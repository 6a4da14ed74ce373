#pragma once

#include <stdexcept>
#include <string>

namespace watch {

/// Raised for malformed configuration: unreadable plan files, bad JSON,
/// out-of-range settings.  Maps to process exit code 2.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// Raised for data that violates the input contract: missing columns,
/// non-binary treatment, arms absent from a training fold.  Maps to
/// process exit code 3.
struct DataError : std::runtime_error {
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace watch
