#pragma once

#include <stdexcept>
#include <string>

namespace advmark {

/// Raised for invalid configuration or malformed inputs (bad bounds, missing
/// companions, structural mismatches). CLI maps these to exit code 2.
struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Raised for failures during simulation or search. CLI maps these to exit code 3.
struct RuntimeFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A grid whose point count exceeds the configured budget cap.
struct GridTooLargeError : ConfigError {
  using ConfigError::ConfigError;
};

/// Gram matrix could not be factorized even after jitter escalation.
struct SingularModelError : RuntimeFailure {
  using RuntimeFailure::RuntimeFailure;
};

/// Canvas placement whose footprint leaves the paved surface.
struct PlacementError : ConfigError {
  using ConfigError::ConfigError;
};

}  // namespace advmark
