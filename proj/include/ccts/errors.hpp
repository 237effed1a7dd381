#pragma once

#include <stdexcept>
#include <string>

namespace ccts {

// Invalid argument to an operation (bad shapes, out-of-range values, empty input).
struct ArgumentError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Input data violates a structural invariant (non-monotone timestamps, NaN values).
struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// File header or column layout does not match the declared schema.
struct SchemaError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Configuration file problem; `field` is the dotted section.key path.
struct ConfigError : std::runtime_error {
  std::string field;
  ConfigError(std::string field_path, const std::string& what)
      : std::runtime_error(field_path + ": " + what), field(std::move(field_path)) {}
};

// Non-finite value produced during numeric evaluation; carries the step index
// (time step inside a sequence, or optimizer step) where it appeared.
struct NumericError : std::runtime_error {
  long step;
  NumericError(const std::string& what, long step_index)
      : std::runtime_error(what + " (step " + std::to_string(step_index) + ")"), step(step_index) {}
};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace ccts
