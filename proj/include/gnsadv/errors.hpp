#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace gnsadv {

// Every error raised by the library derives from Error so the CLI can map
// failures to a single nonzero exit path.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

class DataError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error(what + " (line " + std::to_string(line) + ")"), line_(line) {}
  explicit ParseError(const std::string& what) : Error(what) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_ = 0;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class UsageError : public Error {
 public:
  using Error::Error;
};

// The quantity being asked for is undefined at the given input (e.g. a noise
// scale at a zero gradient).
class DegenerateInputError : public Error {
 public:
  using Error::Error;
};

class InsufficientSignalError : public Error {
 public:
  using Error::Error;
};

class CatalogError : public Error {
 public:
  using Error::Error;
};

}  // namespace gnsadv
