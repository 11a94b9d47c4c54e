#pragma once

#include <stdexcept>
#include <string>

namespace swag {

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// Errors caused by bad or missing input data (CLI exit code 2).
class DataError : public Error {
  public:
    using Error::Error;
};

// Errors caused by non-finite or degenerate numerics (CLI exit code 3).
class NumericError : public Error {
  public:
    using Error::Error;
};

class DegenerateCovariance : public NumericError {
  public:
    using NumericError::NumericError;
};

class MismatchedForward : public Error {
  public:
    using Error::Error;
};

class DimensionMismatch : public Error {
  public:
    using Error::Error;
};

class UnknownImage : public DataError {
  public:
    using DataError::DataError;
};

class EmptyDataset : public DataError {
  public:
    using DataError::DataError;
};

class BadInitialization : public DataError {
  public:
    using DataError::DataError;
};

class MissingFile : public DataError {
  public:
    using DataError::DataError;
};

class UnsupportedCameraModel : public DataError {
  public:
    using DataError::DataError;
};

class MalformedLine : public DataError {
  public:
    MalformedLine(const std::string &file, int line, const std::string &what)
        : DataError(file + ":" + std::to_string(line) + ": " + what), line_(line) {}
    int line() const { return line_; }

  private:
    int line_;
};

class IoError : public DataError {
  public:
    using DataError::DataError;
};

class VersionMismatch : public DataError {
  public:
    using DataError::DataError;
};

class CorruptArray : public DataError {
  public:
    using DataError::DataError;
};

} // namespace swag
