#pragma once

#include <Eigen/Core>

#include <stdexcept>
#include <string>

namespace wml {

/// Largest matrix dimension supported by the small dense kernels.
inline constexpr int kMaxDim = 6;

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor, kMaxDim, kMaxDim>;
using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor, kMaxDim, 1>;

/// Raised when an input violates a documented precondition.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised by iterative solvers that hit their iteration cap.
/// Carries the last iterate's quality so callers can decide what to do.
class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& what, double last_value)
      : std::runtime_error(what), last_value_(last_value) {}
  double last_value() const noexcept { return last_value_; }

 private:
  double last_value_;
};

inline double conjugate_exponent(double p) { return p / (p - 1.0); }

}  // namespace wml
