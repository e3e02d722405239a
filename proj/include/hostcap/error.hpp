#pragma once

#include <stdexcept>
#include <string>

namespace hostcap {

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Malformed input file (syntax, missing keys, wrong types).
class ParseError : public Error {
 public:
  explicit ParseError(const std::string& msg) : Error("parse error: " + msg) {}
};

/// Well-formed input that violates a model invariant.
class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& msg)
      : Error("validation error: " + msg) {}
};

/// Caller passed arguments outside an operation's domain.
class InvalidArgument : public Error {
 public:
  explicit InvalidArgument(const std::string& msg)
      : Error("invalid argument: " + msg) {}
};

}  // namespace hostcap
