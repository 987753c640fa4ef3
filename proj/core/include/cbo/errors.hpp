#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace cbo {

/// Base class for every error raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A matrix that should be positive definite could not be factorized.
class NumericalError : public Error {
 public:
  NumericalError(std::string matrix, const std::string& what)
      : Error(what + " (matrix: " + matrix + ")"), matrix_(std::move(matrix)) {}

  const std::string& matrix() const noexcept { return matrix_; }

 private:
  std::string matrix_;
};

class TrainingDivergedError : public Error {
 public:
  explicit TrainingDivergedError(std::size_t epoch)
      : Error("training diverged (non-finite loss) at epoch " + std::to_string(epoch)),
        epoch_(epoch) {}

  std::size_t epoch() const noexcept { return epoch_; }

 private:
  std::size_t epoch_;
};

/// Predictions requested from a model whose factorization is missing or stale.
class StaleStateError : public Error {
 public:
  using Error::Error;
};

/// Training data that cannot support the requested model (e.g. a single class).
class DegenerateDataError : public Error {
 public:
  using Error::Error;
};

class FormatError : public Error {
 public:
  using Error::Error;
};

class LengthError : public Error {
 public:
  using Error::Error;
};

/// Invalid user configuration. `field` names the offending key when known.
class ConfigError : public Error {
 public:
  ConfigError(std::string field, const std::string& what)
      : Error(field.empty() ? what : field + ": " + what), field_(std::move(field)) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

}  // namespace cbo
