#pragma once

#include <stdexcept>
#include <string>

namespace pbnn {

/// Bad argument or violated precondition.
class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Not enough trajectory samples to build the requested windows.
class InsufficientDataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The ODE integrator produced a non-finite state.
class IntegrationDivergedError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Sample variance requested from fewer than two batches.
class VarianceUndefinedError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed configuration or input files.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace pbnn
