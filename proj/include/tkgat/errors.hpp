#pragma once

#include <stdexcept>
#include <string>

namespace tkgat {

/// Operand shapes do not fit the operation.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A precondition on arguments (not shapes) was violated.
class ContractError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// An object was used in a state that does not permit the call.
class StateError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Input data (dataset files, snapshots) failed validation.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// NaN or Inf appeared where finite values are required.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace tkgat
