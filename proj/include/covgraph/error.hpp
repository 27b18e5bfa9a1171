#pragma once

#include <stdexcept>
#include <string>

namespace covgraph {

// Base for every error the library throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input: unknown labels, ragged files, bad configuration.
class InputError : public Error {
 public:
  using Error::Error;
};

// A matrix that must be positive definite (or invertible) is not.
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace covgraph
