#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace reef {

// Error categories. Values match the C API status codes and CLI exit codes.
enum class ErrorKind : int {
  kIo = 2,
  kValidation = 3,
  kInternal = 4,
  kInsufficientData = 5,
  kInvalidArgument = 6,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(ErrorKind::kIo, what) {}
};

// Raised when an input violates a documented invariant. `field` names the
// offending field (may be empty).
class ValidationError : public Error {
 public:
  ValidationError(const std::string& field, const std::string& what);
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

// Malformed input with a 1-based line number.
class ParseError : public ValidationError {
 public:
  ParseError(std::size_t line, const std::string& what);
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class InternalError : public Error {
 public:
  explicit InternalError(const std::string& what)
      : Error(ErrorKind::kInternal, what) {}
};

class InsufficientDataError : public Error {
 public:
  explicit InsufficientDataError(const std::string& what)
      : Error(ErrorKind::kInsufficientData, what) {}
};

}  // namespace reef
