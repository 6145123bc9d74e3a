// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace desksr {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A precondition on an argument was violated (shapes, ranges, sizes).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Input data is unusable: missing files, malformed records, out-of-vocabulary
/// symbols, infeasible targets.
class DataError : public Error {
 public:
  using Error::Error;
};

/// A file parsed but its structure or version is not one we understand.
class FormatError : public DataError {
 public:
  using DataError::DataError;
};

/// Training or checking produced a non-finite or out-of-tolerance number.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace desksr
