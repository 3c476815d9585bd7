#pragma once

#include <stdexcept>
#include <string>

namespace cbm {

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input: bad config fields, violated type invariants, unusable
/// arguments. Messages name the offending field where one exists.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Structurally valid model that degenerates: trivial local bias, not
/// sufficiently random, or a singular/indefinite optimality system.
class DegeneracyError : public Error {
 public:
  using Error::Error;
};

/// Numerical breakdown (non-finite values, failed iteration).
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace cbm
