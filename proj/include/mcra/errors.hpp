#pragma once

#include <stdexcept>
#include <string>

namespace mcra {

struct SimError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Bad key, missing key, or out-of-range value in a config file.
struct ConfigError : SimError {
  using SimError::SimError;
};

// Malformed trace row or incomplete trajectory.
struct TraceError : SimError {
  using SimError::SimError;
};

// Query past the materialized population horizon.
struct HorizonError : SimError {
  using SimError::SimError;
};

// Tensor / layer dimension mismatch.
struct ShapeError : SimError {
  using SimError::SimError;
};

// Non-finite value escaped a numeric computation.
struct NumericError : SimError {
  using SimError::SimError;
};

}  // namespace mcra
