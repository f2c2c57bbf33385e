#pragma once

#include <stdexcept>
#include <string>

namespace groundal {

// Base of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad arguments, configs or hyperparameters. Maps to CLI exit code 1.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Malformed or inconsistent input files.
class DataError : public Error {
 public:
  using Error::Error;
};

// Degenerate numerics (non-finite likelihood, rank shortfall, ...).
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace groundal
