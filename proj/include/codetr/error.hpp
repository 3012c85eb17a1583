#pragma once

#include <stdexcept>
#include <string>

namespace codetr {

// Violated precondition of a library call (wrong arity, empty input, bad index).
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Tensor shapes that do not fit the requested operation.
class ShapeError : public ContractError {
 public:
  using ContractError::ContractError;
};

// NaN or infinity where a finite value is required.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid experiment or component configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace codetr
