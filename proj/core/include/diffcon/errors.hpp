#pragma once

#include <stdexcept>

namespace diffcon {

// Invalid configuration or parameter values supplied by the caller.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Unreadable, malformed, or empty input data.
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Numerical failure: overflow, non-finite density, inconsistent sampler state.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Requested branching simulation sits in the non-stationary regime.
struct ExplosiveRegimeError : ConfigError {
  using ConfigError::ConfigError;
};

}  // namespace diffcon
