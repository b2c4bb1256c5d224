#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>

namespace celc {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input violates a documented precondition (bad interval, zero line, ...).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// The configuration is geometrically degenerate for the requested operation.
class DegenerateError : public Error {
 public:
  using Error::Error;
};

/// Text input could not be parsed; carries the 1-based line number.
class ParseError : public Error {
 public:
  ParseError(std::string file, std::size_t line, const std::string& what)
      : Error(file + ":" + std::to_string(line) + ": " + what),
        file_(std::move(file)),
        line_(line) {}

  const std::string& file() const { return file_; }
  std::size_t line() const { return line_; }

 private:
  std::string file_;
  std::size_t line_;
};

}  // namespace celc
