#pragma once

#include <stdexcept>
#include <string>

namespace bsca {

// Base class for all errors raised by this library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor/layer dimension mismatches. The message names the offending dimension.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Non-finite values produced or consumed where finite values are required.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Malformed or unreadable inputs: files, manifests, configs, volumes.
class DataError : public Error {
 public:
  using Error::Error;
};

}  // namespace bsca
