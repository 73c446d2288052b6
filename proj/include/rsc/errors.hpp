#pragma once

#include <stdexcept>
#include <string>

namespace rsc {

// Base class for all errors raised by this library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Bad shapes, sizes, weights, or otherwise invalid inputs.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// A regression design is rank deficient; the message names the column.
class SingularDesign : public Error {
 public:
  using Error::Error;
};

// A statistic is undefined for the given input (0/0 situations,
// all-zero coefficient sets, zero-variance residuals, zero confounding).
class DegenerateStatistic : public Error {
 public:
  using Error::Error;
};

// Inconsistent experiment or schema configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// File I/O failure; the message carries the path.
class IoError : public Error {
 public:
  using Error::Error;
};

// Malformed CSV/JSON input; the message carries row/column context.
class ParseError : public Error {
 public:
  using Error::Error;
};

}  // namespace rsc
