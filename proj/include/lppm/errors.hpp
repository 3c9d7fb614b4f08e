#pragma once

#include <stdexcept>
#include <string>

namespace lppm {

/// Malformed input: bad arguments, unsorted logs, unknown pair indices.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Numerical breakdown: singular covariance, non-finite integrand,
/// an event no admissible pair can explain.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConvergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace lppm
