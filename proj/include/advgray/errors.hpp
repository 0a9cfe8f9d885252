#pragma once

#include <stdexcept>
#include <string>

namespace advgray {

// Tensor/layer shape contract violations.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Bad configuration values: inverted ranges, negative epsilon, unknown
// architecture ids. Maps to the CLI usage exit code.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Malformed or inconsistent input data: IDX containers, CSV rows,
// checkpoints, fit inputs. Maps to the CLI data exit code.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-finite loss during training.
class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace advgray
