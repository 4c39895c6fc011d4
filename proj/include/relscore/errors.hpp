// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace relscore {

// Base class for all errors raised by this library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shape or dimensionality mismatch between operands, parameters and data.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// An API precondition was violated (empty sequence, non-scalar loss, ...).
class ContractError : public Error {
 public:
  using Error::Error;
};

// A configuration value is outside its valid range.
class ParameterError : public Error {
 public:
  using Error::Error;
};

// Numeric domain violation or non-finite value where one is not allowed.
class NumericError : public Error {
 public:
  using Error::Error;
};

// A file does not follow its documented format.
class FormatError : public Error {
 public:
  using Error::Error;
};

// Inconsistent or degenerate data (duplicate ids, missing label class, ...).
class DataError : public Error {
 public:
  using Error::Error;
};

// Failure to read or write a file.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace relscore
