#pragma once

#include <stdexcept>
#include <string>

namespace zf {

/// Base class of every error raised by the library. The CLI maps these to
/// exit code 1; anything else escaping is a bug.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor shapes disagree with an operation's contract.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values, failed factorizations and similar numerical failures.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// An argument is outside its documented domain.
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// A caller broke a precondition (e.g. backward on a non-scalar).
class ContractError : public Error {
 public:
  using Error::Error;
};

/// Malformed or incompatible file contents.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Input data cannot support the requested computation (constant columns,
/// too few rows, ragged CSV, ...).
class DataError : public Error {
 public:
  using Error::Error;
};

}  // namespace zf
