#pragma once

#include <stdexcept>
#include <string>

namespace udil {

// Violated precondition of an operation (wrong arity, empty batch, ...).
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Incompatible tensor shapes; the message names the offending layer or op.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Invalid user configuration. Maps to CLI exit code 2.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Malformed binary input (bad magic, truncated payload).
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Well-formed input that violates a dataset invariant.
class IngestionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace udil
