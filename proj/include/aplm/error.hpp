#pragma once

#include <stdexcept>
#include <string>

namespace aplm {

/// Broad failure category; the CLI maps each one to an exit code.
enum class ErrorKind {
  config,     // malformed or inconsistent configuration
  data,       // input data problems (missing columns, out-of-domain values, empty groups)
  numerical,  // singular systems, underdetermined groups, degenerate bases
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(ErrorKind::config, what) {}
};

class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error(ErrorKind::data, what) {}
};

/// A covariate value fell outside the spline domain [0,1] after its affine transform.
class DomainError : public DataError {
 public:
  DomainError(int column, double raw_value, const std::string& what)
      : DataError(what), column_(column), raw_value_(raw_value) {}
  int column() const noexcept { return column_; }
  double raw_value() const noexcept { return raw_value_; }

 private:
  int column_;
  double raw_value_;
};

class DegenerateCovariateError : public DataError {
 public:
  using DataError::DataError;
};

class NumericalError : public Error {
 public:
  explicit NumericalError(const std::string& what) : Error(ErrorKind::numerical, what) {}
};

class DegenerateBasisError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// Rank deficiency found during a least-squares solve. `column` is the first
/// design column that is numerically dependent on the ones before it.
class SingularDesignError : public NumericalError {
 public:
  SingularDesignError(long column, const std::string& what) : NumericalError(what), column_(column) {}
  long column() const noexcept { return column_; }

 private:
  long column_;
};

class NotPositiveDefiniteError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class UnderdeterminedGroupError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class IncompatibleFitError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

}  // namespace aplm
