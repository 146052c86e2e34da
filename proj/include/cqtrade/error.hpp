#pragma once

#include <stdexcept>
#include <string>

namespace cqtrade {

/// Base class for every error the library raises.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input: bad query text, schema/arity mismatch, invalid
/// decomposition, inconsistent parameters. The CLI maps these to exit code 2.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Query is well-formed but outside what an engine entry point handles
/// (free head variables, negation passed to a positive-only builder, ...).
class UnsupportedQueryError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace cqtrade
