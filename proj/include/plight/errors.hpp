#pragma once

#include <stdexcept>
#include <string>

namespace plight {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor or vector dimensions do not match what an operation expects.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// A documented precondition of an operation was violated by the caller.
class ContractError : public Error {
 public:
  using Error::Error;
};

// An operation was invoked while the object is in the wrong state.
class StateError : public Error {
 public:
  using Error::Error;
};

// A configuration file or value is missing or invalid.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// A structured-text document could not be parsed.
class ParseError : public Error {
 public:
  using Error::Error;
};

// Two artifacts (checkpoint, grid, pool) cannot be combined.
class CompatibilityError : public Error {
 public:
  using Error::Error;
};

}  // namespace plight
