#pragma once

// Shared numeric types, error classes and small helpers.

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <stdexcept>
#include <string>

namespace momap {

using Complex = std::complex<double>;
using CVector = Eigen::VectorXcd;
using CMatrix = Eigen::MatrixXcd;
using RVector = Eigen::VectorXd;
using RMatrix = Eigen::MatrixXd;

inline constexpr double pi = std::numbers::pi;
inline constexpr Complex I{0.0, 1.0};

/// Largest Hilbert-space dimension accepted by the dense eigensolver paths.
inline constexpr Eigen::Index max_dense_dimension = 256;

/// Malformed or inconsistent input (dimension mismatch, bad grid, ...).
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A state failed an admissibility gate (positivity, normalization, ...).
class AdmissibilityError : public std::runtime_error {
 public:
  AdmissibilityError(const std::string& what, double offending_value)
      : std::runtime_error(what), value_(offending_value) {}
  double value() const noexcept { return value_; }

 private:
  double value_;
};

/// A time integration became unstable or left its admissible domain.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(const std::string& what, double bound)
      : std::runtime_error(what), bound_(bound) {}
  /// Quantity the run was measured against (CFL step bound, leakage, ...).
  double bound() const noexcept { return bound_; }

 private:
  double bound_;
};

template <class Derived>
double max_abs(const Eigen::DenseBase<Derived>& m) {
  if (m.size() == 0) return 0.0;
  return m.derived().cwiseAbs().maxCoeff();
}

template <class Derived>
bool all_finite(const Eigen::DenseBase<Derived>& m) {
  return m.derived().allFinite();
}

inline void require(bool condition, const std::string& message) {
  if (!condition) throw InputError(message);
}

inline void require_dimension(Eigen::Index n) {
  require(n >= 1, "dimension must be positive");
  if (n > max_dense_dimension)
    throw InputError("dimension " + std::to_string(n) + " exceeds the dense cap of " +
                     std::to_string(max_dense_dimension));
}

/// Least-squares slope of log(err) against log(h).
template <class Range>
double log_log_slope(const Range& h, const Range& err) {
  const auto n = static_cast<double>(std::size(h));
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  auto hi = std::begin(h);
  auto ei = std::begin(err);
  for (; hi != std::end(h); ++hi, ++ei) {
    const double x = std::log(*hi);
    const double y = std::log(*ei);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace momap
