#pragma once

// Finite-dimensional Hilbert space: states, Hermitian operators, the canonical
// symplectic form, the pure-state momentum map J(psi) = -i hbar psi psi^dagger
// and exact (eigendecomposition-based) unitary evolution.

#include "momap/core.hpp"

#include <Eigen/Eigenvalues>

#include <vector>

namespace momap {

inline constexpr double hermitian_tolerance = 1e-12;

struct WaveFunction {
  CVector components;
  double hbar = 1.0;

  WaveFunction() = default;
  explicit WaveFunction(CVector c, double h = 1.0) : components(std::move(c)), hbar(h) {
    require(hbar > 0.0, "hbar must be positive");
    require(all_finite(components), "wavefunction has non-finite entries");
  }

  Eigen::Index dim() const { return components.size(); }
  double squared_norm() const { return components.squaredNorm(); }
  /// Normalization is an admissibility flag, never enforced.
  bool is_normalized(double tol = 1e-10) const { return std::abs(squared_norm() - 1.0) <= tol; }
};

namespace detail {
inline double hermiticity_defect(const CMatrix& a) { return max_abs(a - a.adjoint()); }
inline double skew_defect(const CMatrix& a) { return max_abs(a + a.adjoint()); }
}  // namespace detail

struct HermitianOperator {
  CMatrix entries;

  HermitianOperator() = default;
  explicit HermitianOperator(CMatrix m) : entries(std::move(m)) {
    require(entries.rows() == entries.cols(), "operator must be square");
    require(all_finite(entries), "operator has non-finite entries");
    if (detail::hermiticity_defect(entries) > hermitian_tolerance * std::max(max_abs(entries), 1e-300))
      throw InputError("operator is not Hermitian within tolerance");
  }
  Eigen::Index dim() const { return entries.rows(); }
};

/// Element of u(H), identified with its dual through the trace pairing.
/// Carries units of action when produced by a momentum map.
struct SkewHermitianMoment {
  CMatrix entries;

  SkewHermitianMoment() = default;
  explicit SkewHermitianMoment(CMatrix m) : entries(std::move(m)) {
    require(entries.rows() == entries.cols(), "moment must be square");
    require(all_finite(entries), "moment has non-finite entries");
    if (detail::skew_defect(entries) > hermitian_tolerance * std::max(max_abs(entries), 1e-300))
      throw InputError("moment is not skew-Hermitian within tolerance");
  }
  Eigen::Index dim() const { return entries.rows(); }

  /// rho = i J / hbar, the density-operator presentation of J = -i hbar rho.
  CMatrix as_density(double hbar) const { return (I / hbar) * entries; }
};

struct DensityOperator {
  CMatrix entries;
  double trace = 0.0;

  DensityOperator() = default;
  explicit DensityOperator(CMatrix m) : entries(std::move(m)) {
    require(entries.rows() == entries.cols(), "density operator must be square");
    require(all_finite(entries), "density operator has non-finite entries");
    if (detail::hermiticity_defect(entries) > hermitian_tolerance * std::max(max_abs(entries), 1.0))
      throw InputError("density operator is not Hermitian within tolerance");
    entries = 0.5 * (entries + entries.adjoint()).eval();
    trace = entries.trace().real();
  }

  Eigen::Index dim() const { return entries.rows(); }

  RVector eigenvalues() const {
    require_dimension(dim());
    Eigen::SelfAdjointEigenSolver<CMatrix> es(entries, Eigen::EigenvaluesOnly);
    return es.eigenvalues();
  }
  double min_eigenvalue() const { return eigenvalues().minCoeff(); }
  bool is_positive(double tol = 1e-10) const { return min_eigenvalue() >= -tol; }
  double purity_defect() const { return (entries * entries - entries).norm(); }

  /// J = -i hbar rho.
  SkewHermitianMoment moment(double hbar) const { return SkewHermitianMoment(-I * hbar * entries); }
};

inline double symplectic_form(const WaveFunction& a, const WaveFunction& b) {
  require(a.dim() == b.dim(), "symplectic_form: dimension mismatch");
  require(a.hbar == b.hbar, "symplectic_form: hbar mismatch");
  return 2.0 * a.hbar * a.components.dot(b.components).imag();
}

/// <mu, xi> = Re Tr(mu^dagger xi).
inline double dual_pairing(const CMatrix& mu, const CMatrix& xi) {
  require(mu.rows() == xi.rows() && mu.cols() == xi.cols(), "dual_pairing: dimension mismatch");
  return (mu.adjoint() * xi).trace().real();
}

inline double dual_pairing(const SkewHermitianMoment& mu, const SkewHermitianMoment& xi) {
  return dual_pairing(mu.entries, xi.entries);
}

inline SkewHermitianMoment momentum_map_pure(const WaveFunction& psi) {
  return SkewHermitianMoment(-I * psi.hbar * (psi.components * psi.components.adjoint()));
}

/// exp(-i H t / hbar) through the spectral decomposition of H.
inline CMatrix unitary_propagator(const HermitianOperator& h, double t, double hbar = 1.0) {
  require(hbar > 0.0, "hbar must be positive");
  require_dimension(h.dim());
  Eigen::SelfAdjointEigenSolver<CMatrix> es(h.entries);
  const CMatrix& v = es.eigenvectors();
  CVector phases(h.dim());
  for (Eigen::Index k = 0; k < h.dim(); ++k) phases(k) = std::exp(-I * es.eigenvalues()(k) * t / hbar);
  return v * phases.asDiagonal() * v.adjoint();
}

inline DensityOperator evolve_density(const DensityOperator& rho0, const HermitianOperator& h, double t,
                                      double hbar = 1.0) {
  require(rho0.dim() == h.dim(), "evolve_density: dimension mismatch");
  const CMatrix u = unitary_propagator(h, t, hbar);
  return DensityOperator(u * rho0.entries * u.adjoint());
}

/// s_t = <-i hbar rho(t), xi>, the Noether diagnostic along a trajectory.
inline std::vector<double> noether_series(const std::vector<DensityOperator>& trajectory,
                                          const SkewHermitianMoment& xi, double hbar = 1.0) {
  std::vector<double> out;
  out.reserve(trajectory.size());
  for (const auto& rho : trajectory) {
    require(rho.dim() == xi.dim(), "noether_series: dimension mismatch");
    out.push_back(dual_pairing(CMatrix(-I * hbar * rho.entries), xi.entries));
  }
  return out;
}

inline double commutator_norm(const CMatrix& a, const CMatrix& b) { return max_abs(a * b - b * a); }

}  // namespace momap
