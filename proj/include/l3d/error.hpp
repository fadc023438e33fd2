#pragma once

#include <stdexcept>
#include <string>

namespace l3d {

/// Rejected input: shape mismatch, out-of-range index, invalid configuration.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A computation produced (or was handed) NaN/Inf.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// File could not be opened, read, written, or had an unexpected layout.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace l3d
