#pragma once

#include <stdexcept>
#include <string>

namespace oacsplit {

// Root of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
  virtual const char* kind() const noexcept { return "error"; }
};

class DimensionError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "dimension"; }
};

class DecompositionError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "decomposition_failed"; }
};

class FeasibilityError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "infeasible"; }
};

class ChannelRankError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "channel_rank"; }
};

// A cache or transcript handed back to the wrong object.
class StateError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "state"; }
};

class ConfigError : public Error {
 public:
  ConfigError(std::string field, const std::string& message)
      : Error(field.empty() ? message : field + ": " + message), field_(std::move(field)) {}
  const char* kind() const noexcept override { return "config"; }
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

}  // namespace oacsplit
