#pragma once

#include <stdexcept>
#include <string>

namespace rtomo {

/// Invalid parameters or mismatched shapes. Maps to CLI exit code 1.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Unreadable or unwritable files, malformed file contents. Exit code 2.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A numerical method could not deliver its contract (degenerate spectrum,
/// roots off the unit circle, non-convergence). Exit code 3.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace rtomo
