#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace opsplit {

/// A value fell outside the range a contract allows.
///
/// `bound()` names the violated constraint (e.g. "alpha", "gamma_upper",
/// "dimension") so front ends can report it in machine-readable form.
class ValidationError : public std::invalid_argument {
 public:
  ValidationError(std::string bound, const std::string& message, double value = 0.0,
                  double limit = 0.0)
      : std::invalid_argument(message), bound_(std::move(bound)), value_(value), limit_(limit) {}

  const std::string& bound() const noexcept { return bound_; }
  double value() const noexcept { return value_; }
  double limit() const noexcept { return limit_; }

 private:
  std::string bound_;
  double value_;
  double limit_;
};

/// A relaxation or step-size sequence left its admissible interval at `index()`.
class ScheduleViolation : public ValidationError {
 public:
  ScheduleViolation(std::string bound, const std::string& message, std::size_t index,
                    double value, double lower, double upper)
      : ValidationError(std::move(bound), message, value, upper),
        index_(index),
        lower_(lower),
        upper_(upper) {}

  std::size_t index() const noexcept { return index_; }
  double lower() const noexcept { return lower_; }
  double upper() const noexcept { return upper_; }

 private:
  std::size_t index_;
  double lower_;
  double upper_;
};

/// Linear solve breakdown, non-finite iterates and similar numerical failures.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace opsplit
