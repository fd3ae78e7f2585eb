#pragma once

#include <stdexcept>
#include <string>

namespace p3lm {

// Error taxonomy, mirrored by the CLI exit codes:
//   0 success, 1 usage, 2 data error, 3 numeric failure, 4 selfcheck failure.

struct ShapeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Invalid attention mask (e.g. a fully masked row).
struct MaskError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Non-finite value produced by a numeric op; carries the op name.
struct NumericError : std::runtime_error {
  NumericError(const std::string& op, const std::string& detail)
      : std::runtime_error(op + ": " + detail), op_name(op) {}
  std::string op_name;
};

// Malformed input files, datasets, vocabularies, checkpoints.
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Bad run configuration (unknown keys, invalid values).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Mismatched state between cooperating objects (cache vs prefix, masks vs order).
struct ConsistencyError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace p3lm
