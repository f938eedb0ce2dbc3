#pragma once

#include <stdexcept>
#include <string>

namespace blindsr {

// Shapes of operands do not agree.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A precondition of an operation was violated by the caller.
class ContractError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// The requested configuration is valid in principle but not implemented.
class UnsupportedError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Input is well-formed but the quantity is undefined for it (zero variance, N = 1, ...).
class DegenerateInputError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Object used in the wrong lifecycle state (e.g. a tape replayed twice).
class StateError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Filesystem or format failure; message carries the path.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace blindsr
