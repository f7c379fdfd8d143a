#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace gpkf {

/// Base of every error the library throws on bad data or failed numerics.
/// Precondition violations on arguments use std::invalid_argument instead.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A factorization or inner solve failed even after the jitter ladder.
class NumericalFailure : public Error {
 public:
  using Error::Error;
};

class InsufficientData : public Error {
 public:
  using Error::Error;
};

/// Zero sample variance; autocorrelation is undefined.
class DegenerateSeries : public Error {
 public:
  using Error::Error;
};

class InvalidThreshold : public Error {
 public:
  using Error::Error;
};

/// Window entries are not consecutive in time.
class WindowCorrupt : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// A time-series file skipped a time stamp.
class GapError : public Error {
 public:
  GapError(std::int64_t missing, std::size_t line)
      : Error("line " + std::to_string(line) + ": missing t=" + std::to_string(missing)),
        missing_(missing) {}
  std::int64_t missing_time() const noexcept { return missing_; }

 private:
  std::int64_t missing_;
};

/// Config document does not match the schema; `path()` is e.g. "kernel.lenghtscale".
class SchemaError : public Error {
 public:
  SchemaError(const std::string& path, const std::string& what)
      : Error(path + ": " + what), path_(path) {}
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

}  // namespace gpkf
