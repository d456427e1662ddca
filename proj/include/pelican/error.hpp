#pragma once

#include <stdexcept>
#include <string>

namespace pelican {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor shapes or network wiring do not agree.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Invalid user-supplied configuration (hyperparameters, flags, schema).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed or inconsistent input data.
class DataError : public Error {
 public:
  using Error::Error;
};

/// A non-finite value reached the loss or a gradient.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace pelican
