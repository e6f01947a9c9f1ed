#pragma once

#include <stdexcept>
#include <string>

namespace qf {

// Invalid configuration or argument (violated precondition on a spec struct).
class ParameterError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Input data leaves a quantity undefined, e.g. dividing by a zero spread.
class DegenerateInputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Array shapes that must agree do not.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Non-finite or exploding values inside a recursion. Carries the step index at
// which the problem was detected (-1 when not tied to a step).
class NumericalError : public std::runtime_error {
 public:
  NumericalError(const std::string& what, long step)
      : std::runtime_error(what + (step >= 0 ? " (step " + std::to_string(step) + ")" : "")),
        step_(step) {}
  long step() const noexcept { return step_; }

 private:
  long step_;
};

// Cholesky factorization failed even after the maximal jitter.
class IllConditionedError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Every tuning trial diverged.
class TuningError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace qf
