#pragma once

#include <stdexcept>
#include <string>

namespace qbm {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Configuration or vector lengths disagree with the model.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// An exhaustive enumeration would exceed the configured unit cap.
class CapacityError : public Error {
 public:
  using Error::Error;
};

/// A structural invariant of a model or document does not hold.
class InvariantError : public Error {
 public:
  using Error::Error;
};

/// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Malformed or version-incompatible serialized document.
class SchemaError : public Error {
 public:
  using Error::Error;
};

/// Invalid experiment / trainer configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Numerical failure: divergence, undefined quotient, non-finite values.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Fixed-point iteration did not reach the requested tolerance.
class ConvergenceError : public NumericalError {
 public:
  ConvergenceError(const std::string& what, double best_residual)
      : NumericalError(what), best_residual_(best_residual) {}

  double best_residual() const noexcept { return best_residual_; }

 private:
  double best_residual_;
};

}  // namespace qbm
