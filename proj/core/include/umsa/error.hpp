#pragma once

#include <stdexcept>
#include <string>

namespace umsa {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A state, weight or score became non-finite. The message carries the
/// parameter and state that produced it.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Every particle weight at some epoch was zero (or NaN).
class DegenerateWeightsError : public NumericError {
 public:
  using NumericError::NumericError;
};

/// Two observation times rounded onto the same lattice point.
class CollisionError : public Error {
 public:
  using Error::Error;
};

/// A parameter vector violates its declared constraints or dimension.
class ConstraintError : public Error {
 public:
  using Error::Error;
};

/// Malformed configuration or input file.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace umsa
