#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace rework {

/// Base class for every error raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid configuration or argument values. CLI exit code 2.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A mapped column is missing from an input file.
class SchemaError : public ConfigError {
 public:
  SchemaError(const std::string& column, const std::string& what)
      : ConfigError(what), column_(column) {}
  const std::string& column() const noexcept { return column_; }

 private:
  std::string column_;
};

/// A data row violates a dataset invariant. `row()` is 0-based over data rows.
class ValidationError : public ConfigError {
 public:
  ValidationError(std::size_t row, const std::string& what)
      : ConfigError(what), row_(row) {}
  std::size_t row() const noexcept { return row_; }

 private:
  std::size_t row_;
};

class ShapeError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

/// Estimation failures. CLI exit code 3.
class EstimationError : public Error {
 public:
  using Error::Error;
};

class DegenerateDataError : public EstimationError {
 public:
  using EstimationError::EstimationError;
};

class StratificationError : public EstimationError {
 public:
  using EstimationError::EstimationError;
};

class FitError : public EstimationError {
 public:
  using EstimationError::EstimationError;
};

class CrossfitError : public EstimationError {
 public:
  using EstimationError::EstimationError;
};

class InsufficientDataError : public EstimationError {
 public:
  using EstimationError::EstimationError;
};

/// The requested estimand is undefined on this data (e.g. ATTE without treated rows).
class EstimandError : public EstimationError {
 public:
  using EstimationError::EstimationError;
};

class SingularityError : public EstimationError {
 public:
  using EstimationError::EstimationError;
};

/// Bootstrap too small for a stable quantile.
class UnstableQuantileError : public EstimationError {
 public:
  using EstimationError::EstimationError;
};

/// A policy assigns nobody to treatment, so its GATE is undefined. The share is still reported.
class GateUndefinedError : public EstimationError {
 public:
  explicit GateUndefinedError(double share)
      : EstimationError("GATE undefined: policy treats no observation"), share_(share) {}
  double share() const noexcept { return share_; }

 private:
  double share_;
};

/// File system failures. CLI exit code 4.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace rework
