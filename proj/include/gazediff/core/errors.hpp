#pragma once

#include <stdexcept>
#include <string>

namespace gazediff {

/// Shape or rank mismatch between operands.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Non-finite value encountered during a computation.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed file: bad magic, version, or truncated payload.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Well-formed file whose content violates a data invariant.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid configuration key or value.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace gazediff
