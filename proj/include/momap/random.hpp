#pragma once

// Seeded generators for sampling-based checks.

#include "momap/core.hpp"

#include <Eigen/QR>

#include <cstdint>
#include <random>

namespace momap {

using Rng = std::mt19937_64;

/// Per-sample seed derived from a master seed (splitmix64 step).
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
  std::uint64_t z = master + 0x9e3779b97f4a7c15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline double gaussian(Rng& rng) {
  std::normal_distribution<double> d(0.0, 1.0);
  return d(rng);
}

inline double uniform(Rng& rng, double a = 0.0, double b = 1.0) {
  std::uniform_real_distribution<double> d(a, b);
  return d(rng);
}

inline CVector random_cvector(Eigen::Index n, Rng& rng) {
  CVector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = Complex(gaussian(rng), gaussian(rng));
  return v;
}

inline CMatrix random_cmatrix(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  CMatrix m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = Complex(gaussian(rng), gaussian(rng));
  return m;
}

inline CVector random_unit_vector(Eigen::Index n, Rng& rng) { return random_cvector(n, rng).normalized(); }

inline CMatrix random_hermitian(Eigen::Index n, Rng& rng) {
  const CMatrix g = random_cmatrix(n, n, rng);
  return 0.5 * (g + g.adjoint());
}

/// Element of u(n): xi^dagger = -xi.
inline CMatrix random_skew_hermitian(Eigen::Index n, Rng& rng) { return I * random_hermitian(n, rng); }

/// Haar-distributed unitary (QR of a Ginibre matrix with phase fix).
inline CMatrix random_unitary(Eigen::Index n, Rng& rng) {
  Eigen::HouseholderQR<CMatrix> qr(random_cmatrix(n, n, rng));
  CMatrix q = qr.householderQ() * CMatrix::Identity(n, n);
  const CMatrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Eigen::Index k = 0; k < n; ++k) {
    const Complex d = r(k, k);
    if (std::abs(d) > 0) q.col(k) *= d / std::abs(d);
  }
  return q;
}

}  // namespace momap
