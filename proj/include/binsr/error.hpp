#pragma once

#include <stdexcept>
#include <string>

namespace binsr {

// Error families map one-to-one onto CLI exit codes (see tools/binsr_main.cpp).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad shapes, bad options, out-of-range indices, malformed graphs.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Unreadable files, corrupt checkpoints, non-binary values handed to the packer.
class DataError : public Error {
 public:
  using Error::Error;
};

/// NaN/Inf during optimization.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace binsr
