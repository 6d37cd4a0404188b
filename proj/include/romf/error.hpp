#pragma once

#include <stdexcept>
#include <string>

namespace romf {

/// Base class for every error raised by the library. The CLI maps the
/// concrete subclasses onto process exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor dimensions do not agree with what an operation requires.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration or hyperparameter.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values, failed root brackets, degenerate metrics.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// An operation was invoked in the wrong order (e.g. backward before forward).
class StateError : public Error {
 public:
  using Error::Error;
};

/// File could not be read or written, or has the wrong format.
class IoError : public Error {
 public:
  using Error::Error;
};

/// An upstream artifact required by a pipeline step does not exist.
class MissingArtifactError : public Error {
 public:
  using Error::Error;
};

}  // namespace romf
