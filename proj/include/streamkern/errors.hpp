#pragma once

#include <stdexcept>
#include <string>

namespace streamkern {

// Bad kernel id, bad preset, malformed config file, unsupported construction.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Estimator queried before it has enough data to be initialized.
struct NotReadyError : std::runtime_error {
  explicit NotReadyError(const std::string& msg) : std::runtime_error(msg) {}
};

// A rank-one or block update hit a pivot below the configured tolerance.
struct DegeneratePivotError : std::runtime_error {
  explicit DegeneratePivotError(const std::string& msg) : std::runtime_error(msg) {}
};

// Warm-start batch could not produce an invertible Gram matrix.
struct InitializationError : std::runtime_error {
  explicit InitializationError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace streamkern
