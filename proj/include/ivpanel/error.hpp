#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace ivpanel {

/// Base error. Carries the module and operation that raised it so the CLI can
/// report where a failure came from.
class Error : public std::runtime_error {
 public:
  Error(std::string module, std::string operation, const std::string& what)
      : std::runtime_error(module + "::" + operation + ": " + what),
        module_(std::move(module)),
        operation_(std::move(operation)),
        detail_(what) {}

  const std::string& module() const noexcept { return module_; }
  const std::string& operation() const noexcept { return operation_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  std::string module_;
  std::string operation_;
  std::string detail_;
};

/// Invalid configuration or arguments (CLI exit code 2).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Bad or inconsistent input data (CLI exit code 3).
class DataError : public Error {
 public:
  using Error::Error;
};

class SchemaError : public DataError {
 public:
  using DataError::DataError;
};

class IntegrityError : public DataError {
 public:
  using DataError::DataError;
};

/// Operation called on an object that is not in a usable state.
class StateError : public DataError {
 public:
  using DataError::DataError;
};

/// Numerical estimation failure (CLI exit code 4).
class EstimationError : public Error {
 public:
  using Error::Error;
};

class RankError : public EstimationError {
 public:
  using EstimationError::EstimationError;
};

}  // namespace ivpanel
