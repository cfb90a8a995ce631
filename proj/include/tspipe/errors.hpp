#pragma once

#include <stdexcept>
#include <string>

namespace tspipe {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid argument or configuration value.
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// Component used out of order (e.g. transform before fit).
class ContractError : public Error {
 public:
  using Error::Error;
};

/// Input file could not be read or parsed.
class LoadError : public Error {
 public:
  using Error::Error;
};

/// Data content violates a precondition (shapes, missing labels, ...).
class DataError : public Error {
 public:
  using Error::Error;
};

}  // namespace tspipe
