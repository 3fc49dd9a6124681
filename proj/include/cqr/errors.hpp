#pragma once

#include <stdexcept>
#include <string>

namespace cqr {

// Invalid argument values (tau outside (0,1), empty grids, empty samples).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Inconsistent lengths or dimensions between inputs.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Singular (or numerically singular) normal matrix in a weighted solve.
class RankError : public std::runtime_error {
 public:
  RankError(const std::string& what, double condition)
      : std::runtime_error(what), condition_(condition) {}
  double condition() const noexcept { return condition_; }

 private:
  double condition_;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class CalibrationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InferenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Operation called on an object that is not in a usable state
// (e.g. generating data from an uncalibrated design).
class StateError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace cqr
