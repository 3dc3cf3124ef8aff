#ifndef DGPOST_ERRORS_HPP
#define DGPOST_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace dgpost {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
  virtual const char* kind() const noexcept { return "error"; }
};

/// Bad argument or violated precondition.
class InvalidArgument : public Error {
public:
  using Error::Error;
  const char* kind() const noexcept override { return "invalid_argument"; }
};

/// Iteration did not converge or a factorization broke down.
class NumericFailure : public Error {
public:
  using Error::Error;
  const char* kind() const noexcept override { return "numeric_failure"; }
};

/// A requested operator exceeds the configured memory budget.
class ResourceError : public Error {
public:
  using Error::Error;
  const char* kind() const noexcept override { return "resource_error"; }
};

/// The truncated operator -Lap + V is singular.
class ResonanceError : public NumericFailure {
public:
  using NumericFailure::NumericFailure;
  const char* kind() const noexcept override { return "resonance"; }
};

/// Experiment configuration failed validation; carries the offending field.
class ConfigError : public Error {
public:
  explicit ConfigError(const std::string& message, std::string field = {})
      : Error(field.empty() ? message : field + ": " + message), field_(std::move(field)) {}
  const char* kind() const noexcept override { return "config_error"; }
  const std::string& field() const noexcept { return field_; }

private:
  std::string field_;
};

/// Output file or directory could not be written.
class IoError : public Error {
public:
  using Error::Error;
  const char* kind() const noexcept override { return "io_error"; }
};

} // namespace dgpost

#endif
