#pragma once

#include <stdexcept>
#include <string>

namespace sdprop {

// Base class so callers can catch everything raised by this library in one go.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Vector/matrix operands whose sizes do not line up.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// NaN or infinity where a finite value is required.
class NonFiniteError : public Error {
 public:
  using Error::Error;
};

// Invalid option values or option combinations (CLI, config file, grids).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Malformed binary or text input; carries what was expected vs. found.
class FormatError : public Error {
 public:
  FormatError(const std::string& context, const std::string& expected,
              const std::string& found)
      : Error(context + ": expected " + expected + ", found " + found),
        expected_(expected),
        found_(found) {}

  const std::string& expected() const { return expected_; }
  const std::string& found() const { return found_; }

 private:
  std::string expected_;
  std::string found_;
};

// API misuse, e.g. requesting gradients before any forward pass.
class StateError : public Error {
 public:
  using Error::Error;
};

}  // namespace sdprop
