#pragma once

// Exception hierarchy. UsageError covers violated preconditions and bad
// input; NumericalError covers everything that goes wrong inside a
// computation. The CLI maps the two families onto exit codes 2 and 3.

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace hoa {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class UsageError : public Error {
 public:
  using Error::Error;
};

// The operation is not defined for this model (e.g. a constrained fit
// with p = 1, or discrete directions for a continuous model).
class UnsupportedError : public UsageError {
 public:
  using UsageError::UsageError;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

// Carries the probe location at which a function evaluation went bad.
class DifferentiationError : public NumericalError {
 public:
  DifferentiationError(const std::string& what, std::vector<double> point)
      : NumericalError(what), point_(std::move(point)) {}
  const std::vector<double>& point() const noexcept { return point_; }

 private:
  std::vector<double> point_;
};

class ConvergenceError : public NumericalError {
 public:
  ConvergenceError(const std::string& what, std::vector<double> last)
      : NumericalError(what), last_(std::move(last)) {}
  const std::vector<double>& last_iterate() const noexcept { return last_; }

 private:
  std::vector<double> last_;
};

// Rank deficiency, a non-invertible Jacobian, or an information matrix that
// is not positive definite.
class SingularityError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

// r and q disagree in sign outside the near-MLE window.
class SignMismatchError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

// Two algebraically equivalent evaluations disagreed.
class ConsistencyError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class DomainError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class AccuracyError : public NumericalError {
 public:
  AccuracyError(const std::string& what, double achieved)
      : NumericalError(what), achieved_(achieved) {}
  double achieved_bound() const noexcept { return achieved_; }

 private:
  double achieved_;
};

// A target probability is not bracketed by the curve; suggests a wider grid.
class ExtendGridError : public NumericalError {
 public:
  ExtendGridError(const std::string& what, double lo, double hi)
      : NumericalError(what), lo_(lo), hi_(hi) {}
  double suggested_lo() const noexcept { return lo_; }
  double suggested_hi() const noexcept { return hi_; }

 private:
  double lo_;
  double hi_;
};

}  // namespace hoa
