#pragma once

#include <stdexcept>
#include <string>

namespace osrlab {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor or layer dimensions do not compose.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Malformed on-disk data (IDX, CSV, checkpoint, manifest).
class FormatError : public Error {
 public:
  using Error::Error;
};

/// A precondition on the arguments of an operation was violated.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

}  // namespace osrlab
