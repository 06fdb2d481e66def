#pragma once

#include <stdexcept>
#include <string>

namespace frustra {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input: schema violations, shape mismatches, bad arguments.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// A computation produced or met a value it cannot handle (NaN, empty graph, ...).
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// File could not be opened, read or written.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace frustra
