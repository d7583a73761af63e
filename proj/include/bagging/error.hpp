#pragma once

#include <stdexcept>
#include <string>

namespace bagging {

// Base for every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input data or a violated precondition on user-supplied values.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// File could not be opened, read, or written.
class IoError : public Error {
 public:
  using Error::Error;
};

// Training produced a non-finite loss or otherwise could not complete.
class TrainingError : public Error {
 public:
  using Error::Error;
};

}  // namespace bagging
