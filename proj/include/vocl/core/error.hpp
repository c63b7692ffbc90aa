#pragma once

#include <stdexcept>
#include <string>

namespace vocl {

// Exception families map onto distinct CLI exit codes (see cli/app.hpp).

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Invalid or inconsistent run configuration.
struct ConfigError : Error {
  using Error::Error;
};

/// Dimension mismatch at a module boundary.
struct ShapeError : Error {
  using Error::Error;
};

/// Violated operation precondition (bad offsets, n_iters < 1, ...).
struct PreconditionError : Error {
  using Error::Error;
};

/// Missing, malformed or inconsistent input data.
struct DataError : Error {
  using Error::Error;
};

struct FormatError : DataError {
  using DataError::DataError;
};

struct VersionMismatchError : FormatError {
  using FormatError::FormatError;
};

struct TruncatedFileError : FormatError {
  using FormatError::FormatError;
};

struct ChecksumError : FormatError {
  using FormatError::FormatError;
};

/// Non-finite values encountered during a forward pass or optimization.
struct NumericError : Error {
  using Error::Error;
};

}  // namespace vocl
