#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace obbkit {

/// Base of every error the library throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An input violated a documented invariant (box size, score range, shapes...).
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Malformed text input. `line()` is 1-based, 0 when not line-oriented.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error(line > 0 ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// The 2x2 center map of a decode variant cannot be inverted for this proposal.
class SingularTransformError : public Error {
 public:
  using Error::Error;
};

}  // namespace obbkit
