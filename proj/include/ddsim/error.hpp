#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ddsim {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Invalid user configuration; the CLI maps this to exit code 1.
struct ConfigError : Error {
  using Error::Error;
};

/// Failure while simulating; exit code 2.
struct SimulationError : Error {
  using Error::Error;
};

struct ParseError : Error {
  ParseError(std::size_t line, std::size_t column, const std::string& what)
      : Error("line " + std::to_string(line) + ", column " + std::to_string(column) + ": " + what),
        line(line),
        column(column) {}

  std::size_t line;
  std::size_t column;
};

struct FitError : Error {
  using Error::Error;
};

/// Raised when two levels are too close for a transition gradient to be defined.
struct DegeneracyError : Error {
  using Error::Error;
};

}  // namespace ddsim
