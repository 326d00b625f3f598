#pragma once

#include <stdexcept>
#include <string>

namespace crossloc {

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Invalid configuration or usage (bad flag values, mismatched dimensions
/// chosen by the caller, unknown preset names). Maps to CLI exit code 1.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Problems with input data or files on disk (bad magic bytes, empty runs,
/// missing media). Maps to CLI exit code 2.
class DataError : public Error {
 public:
  using Error::Error;
};

/// Numeric failure during computation (NaN loss, non-scalar backward root).
/// Maps to CLI exit code 3.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Tensor shape mismatch inside the numeric core; message names the
/// offending op and the shapes involved.
class ShapeError : public Error {
 public:
  using Error::Error;
};

}  // namespace crossloc
