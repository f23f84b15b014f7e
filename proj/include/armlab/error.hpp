#pragma once

#include <stdexcept>
#include <string>

namespace armlab {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shapes, extents or kernel geometry that do not fit together.
class GeometryError : public Error {
 public:
  using Error::Error;
};

/// Bad input data: labels, CSV rows, missing files, empty classes.
class DataError : public Error {
 public:
  using Error::Error;
};

/// Inconsistent configuration (checkpoint vs dataset, invalid flags).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Raised by the finite-difference oracle when f is not finite.
class OracleError : public Error {
 public:
  using Error::Error;
};

/// Non-finite gradients or a diverging loss.
class TrainingError : public Error {
 public:
  using Error::Error;
};

/// Filesystem and format failures.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace armlab
