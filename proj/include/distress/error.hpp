#pragma once

#include <stdexcept>
#include <string>

namespace distress {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Caller supplied arguments that violate an operation's precondition.
class InvalidInput : public Error {
 public:
  using Error::Error;
};

/// A delimited input lacks a mandatory column.
class SchemaError : public InvalidInput {
 public:
  SchemaError(const std::string& column)
      : InvalidInput("missing mandatory column '" + column + "'"), column_(column) {}
  const std::string& column() const noexcept { return column_; }

 private:
  std::string column_;
};

class ParseError : public InvalidInput {
 public:
  using InvalidInput::InvalidInput;
};

class EmptyDataset : public InvalidInput {
 public:
  using InvalidInput::InvalidInput;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class CalibrationFailure : public Error {
 public:
  using Error::Error;
};

class UnsupportedModel : public InvalidInput {
 public:
  using InvalidInput::InvalidInput;
};

}  // namespace distress
