#pragma once

#include <stdexcept>
#include <string>

namespace disteval {

// Base for every failure the library reports. code() is a stable,
// machine-readable tag used by the CLI error line.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual const char* code() const noexcept { return "error"; }
};

// Malformed input text (run, truth, attribute files).
class ParseError : public Error {
 public:
  using Error::Error;
  const char* code() const noexcept override { return "parse_error"; }
};

// Well-formed input that violates a contract (mismatched sets, bad ranges).
class ValidationError : public Error {
 public:
  using Error::Error;
  const char* code() const noexcept override { return "validation_error"; }
};

// Bad command-line usage: missing flags or inconsistent combinations.
class UsageError : public Error {
 public:
  using Error::Error;
  const char* code() const noexcept override { return "usage_error"; }
};

class IoError : public Error {
 public:
  using Error::Error;
  const char* code() const noexcept override { return "io_error"; }
};

}  // namespace disteval
