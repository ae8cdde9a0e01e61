#pragma once

// Fields on a one-degree-of-freedom phase-space grid (q, p): storage,
// centered difference stencils, quadrature, interpolation and CSV dumps.
// Arrays are Nq x Np with q varying fastest.

#include "momap/core.hpp"

#include <algorithm>
#include <ostream>
#include <string>

namespace momap {

enum class PhaseBoundary { open, periodic_q };

class PhaseGrid2D {
 public:
  PhaseGrid2D() = default;
  PhaseGrid2D(double q_lo, double q_hi, Eigen::Index nq, double p_lo, double p_hi, Eigen::Index np,
              PhaseBoundary bc = PhaseBoundary::open)
      : q_lo_(q_lo), q_hi_(q_hi), p_lo_(p_lo), p_hi_(p_hi), nq_(nq), np_(np), bc_(bc) {
    require(nq >= 16 && np >= 16, "phase grid needs at least 16 nodes per axis");
    require(q_hi > q_lo && p_hi > p_lo, "phase grid box must have positive extent");
  }
  static PhaseGrid2D square(double half_width, Eigen::Index n, PhaseBoundary bc = PhaseBoundary::open) {
    return {-half_width, half_width, n, -half_width, half_width, n, bc};
  }

  Eigen::Index nq() const { return nq_; }
  Eigen::Index np() const { return np_; }
  Eigen::Index size() const { return nq_ * np_; }
  PhaseBoundary boundary() const { return bc_; }
  bool periodic_q() const { return bc_ == PhaseBoundary::periodic_q; }
  double q_lower() const { return q_lo_; }
  double q_upper() const { return q_hi_; }
  double p_lower() const { return p_lo_; }
  double p_upper() const { return p_hi_; }

  double hq() const { return periodic_q() ? (q_hi_ - q_lo_) / static_cast<double>(nq_) : (q_hi_ - q_lo_) / static_cast<double>(nq_ - 1); }
  double hp() const { return (p_hi_ - p_lo_) / static_cast<double>(np_ - 1); }
  double q(Eigen::Index i) const { return q_lo_ + static_cast<double>(i) * hq(); }
  double p(Eigen::Index j) const { return p_lo_ + static_cast<double>(j) * hp(); }

  Eigen::ArrayXXd q_field() const {
    Eigen::ArrayXXd f(nq_, np_);
    for (Eigen::Index j = 0; j < np_; ++j)
      for (Eigen::Index i = 0; i < nq_; ++i) f(i, j) = q(i);
    return f;
  }
  Eigen::ArrayXXd p_field() const {
    Eigen::ArrayXXd f(nq_, np_);
    for (Eigen::Index j = 0; j < np_; ++j)
      for (Eigen::Index i = 0; i < nq_; ++i) f(i, j) = p(j);
    return f;
  }

  /// Trapezoid weights along open axes, uniform along the periodic axis.
  Eigen::ArrayXXd quadrature_weights() const {
    Eigen::ArrayXXd w = Eigen::ArrayXXd::Constant(nq_, np_, hq() * hp());
    if (!periodic_q()) {
      w.row(0) *= 0.5;
      w.row(nq_ - 1) *= 0.5;
    }
    w.col(0) *= 0.5;
    w.col(np_ - 1) *= 0.5;
    return w;
  }

  /// Nodes within `cells` cells of an open edge.
  Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> boundary_layer(Eigen::Index cells = 2) const {
    Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> m(nq_, np_);
    for (Eigen::Index j = 0; j < np_; ++j)
      for (Eigen::Index i = 0; i < nq_; ++i)
        m(i, j) = j < cells || j >= np_ - cells || (!periodic_q() && (i < cells || i >= nq_ - cells));
    return m;
  }

  bool operator==(const PhaseGrid2D& o) const {
    return q_lo_ == o.q_lo_ && q_hi_ == o.q_hi_ && p_lo_ == o.p_lo_ && p_hi_ == o.p_hi_ && nq_ == o.nq_ &&
           np_ == o.np_ && bc_ == o.bc_;
  }

 private:
  double q_lo_ = 0, q_hi_ = 1, p_lo_ = 0, p_hi_ = 1;
  Eigen::Index nq_ = 16, np_ = 16;
  PhaseBoundary bc_ = PhaseBoundary::open;
};

inline void require_same_phase_grid(const PhaseGrid2D& a, const PhaseGrid2D& b, const char* what) {
  if (!(a == b)) throw InputError(std::string(what) + ": phase grid mismatch");
}

using ComplexField = Eigen::ArrayXXcd;
using RealField = Eigen::ArrayXXd;

struct ClassicalWaveFunction {
  PhaseGrid2D grid;
  ComplexField values;
  double hbar = 1.0;

  ClassicalWaveFunction() = default;
  ClassicalWaveFunction(PhaseGrid2D g, ComplexField v, double h = 1.0) : grid(g), values(std::move(v)), hbar(h) {
    require(values.rows() == grid.nq() && values.cols() == grid.np(), "wave function size does not match phase grid");
    require(values.allFinite(), "wave function has non-finite entries");
    require(hbar > 0.0, "hbar must be positive");
  }
  template <class F>
  static ClassicalWaveFunction from_function(const PhaseGrid2D& g, F&& f, double h = 1.0) {
    ComplexField v(g.nq(), g.np());
    for (Eigen::Index j = 0; j < g.np(); ++j)
      for (Eigen::Index i = 0; i < g.nq(); ++i) v(i, j) = f(g.q(i), g.p(j));
    return ClassicalWaveFunction(g, std::move(v), h);
  }

  double squared_norm() const { return (grid.quadrature_weights() * values.abs2()).sum(); }
  /// Fraction of |psi|^2 within two cells of an open edge.
  double boundary_leakage() const {
    const RealField m = grid.quadrature_weights() * values.abs2();
    const double total = m.sum();
    return total > 0.0 ? grid.boundary_layer().select(m, 0.0).sum() / total : 0.0;
  }
};

struct PhaseDensity {
  PhaseGrid2D grid;
  RealField values;

  PhaseDensity() = default;
  PhaseDensity(PhaseGrid2D g, RealField v) : grid(g), values(std::move(v)) {
    require(values.rows() == grid.nq() && values.cols() == grid.np(), "density size does not match phase grid");
    require(values.allFinite(), "density has non-finite entries");
  }
  template <class F>
  static PhaseDensity from_function(const PhaseGrid2D& g, F&& f) {
    RealField v(g.nq(), g.np());
    for (Eigen::Index j = 0; j < g.np(); ++j)
      for (Eigen::Index i = 0; i < g.nq(); ++i) v(i, j) = f(g.q(i), g.p(j));
    return PhaseDensity(g, std::move(v));
  }

  double integral() const { return (grid.quadrature_weights() * values).sum(); }
  double l2_norm() const { return std::sqrt((grid.quadrature_weights() * values.square()).sum()); }
  double boundary_leakage() const {
    const RealField m = grid.quadrature_weights() * values.abs();
    const double total = m.sum();
    return total > 0.0 ? grid.boundary_layer().select(m, 0.0).sum() / total : 0.0;
  }
};

// ---------------------------------------------------------------------------
// Stencils

namespace detail {

/// Derivative of a 1D line of samples (stride over a strided view).
template <class Line, class Out>
void differentiate_line(const Line& f, Out&& out, double h, bool periodic, int order) {
  const Eigen::Index n = f.size();
  auto at = [&](Eigen::Index k) { return f(periodic ? ((k % n) + n) % n : k); };
  for (Eigen::Index k = 0; k < n; ++k) {
    const bool far = periodic || (k >= 2 && k + 2 < n);
    if (order == 4 && far) {
      out(k) = (-at(k + 2) + 8.0 * at(k + 1) - 8.0 * at(k - 1) + at(k - 2)) / (12.0 * h);
    } else if (periodic || (k >= 1 && k + 1 < n)) {
      out(k) = (at(k + 1) - at(k - 1)) / (2.0 * h);
    } else if (k == 0) {
      out(k) = (-3.0 * f(0) + 4.0 * f(1) - f(2)) / (2.0 * h);
    } else {
      out(k) = (3.0 * f(n - 1) - 4.0 * f(n - 2) + f(n - 3)) / (2.0 * h);
    }
  }
}

}  // namespace detail

/// Centered d/dq (order 2 or 4); one-sided second order at open edges.
template <class Derived>
Eigen::Array<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic> diff_q(const Eigen::ArrayBase<Derived>& f,
                                                                              const PhaseGrid2D& g, int order = 2) {
  require(order == 2 || order == 4, "stencil order must be 2 or 4");
  Eigen::Array<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic> out(f.rows(), f.cols());
  for (Eigen::Index j = 0; j < f.cols(); ++j) detail::differentiate_line(f.col(j), out.col(j), g.hq(), g.periodic_q(), order);
  return out;
}

template <class Derived>
Eigen::Array<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic> diff_p(const Eigen::ArrayBase<Derived>& f,
                                                                              const PhaseGrid2D& g, int order = 2) {
  require(order == 2 || order == 4, "stencil order must be 2 or 4");
  Eigen::Array<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic> out(f.rows(), f.cols());
  for (Eigen::Index i = 0; i < f.rows(); ++i) detail::differentiate_line(f.row(i), out.row(i), g.hp(), false, order);
  return out;
}

// ---------------------------------------------------------------------------
// Interpolation

/// Cubic (4-point Lagrange per axis) interpolation of a field at (q, p).
/// Points outside the box return zero.
template <class Scalar>
Scalar interpolate(const Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic>& f, const PhaseGrid2D& g, double q,
                   double p) {
  auto weights = [](double t, double w[4]) {
    w[0] = -t * (t - 1) * (t - 2) / 6.0;
    w[1] = (t + 1) * (t - 1) * (t - 2) / 2.0;
    w[2] = -(t + 1) * t * (t - 2) / 2.0;
    w[3] = (t + 1) * t * (t - 1) / 6.0;
  };
  const double u = (q - g.q_lower()) / g.hq();
  const double v = (p - g.p_lower()) / g.hp();
  const double eps = 1e-9;
  if (v < -eps || v > static_cast<double>(g.np() - 1) + eps) return Scalar(0);
  if (!g.periodic_q() && (u < -eps || u > static_cast<double>(g.nq() - 1) + eps)) return Scalar(0);

  auto base = [](double x, Eigen::Index n, bool periodic) {
    Eigen::Index b = static_cast<Eigen::Index>(std::floor(x)) - 1;
    if (!periodic) b = std::clamp<Eigen::Index>(b, 0, n - 4);
    return b;
  };
  const Eigen::Index bi = base(u, g.nq(), g.periodic_q());
  const Eigen::Index bj = base(v, g.np(), false);
  double wq[4], wp[4];
  weights(u - static_cast<double>(bi) - 1.0, wq);
  weights(v - static_cast<double>(bj) - 1.0, wp);
  Scalar s(0);
  for (int b = 0; b < 4; ++b) {
    Scalar row(0);
    for (int a = 0; a < 4; ++a) {
      Eigen::Index i = bi + a;
      if (g.periodic_q()) i = ((i % g.nq()) + g.nq()) % g.nq();
      row += wq[a] * f(i, bj + b);
    }
    s += wp[b] * row;
  }
  return s;
}

// ---------------------------------------------------------------------------
// CSV

/// node,q,p,re_psi,im_psi,f (one row per node; f may be omitted).
inline void write_field_csv(std::ostream& os, const PhaseGrid2D& g, const ComplexField& psi, const RealField* f = nullptr) {
  os << "node,q,p,re_psi,im_psi,f\n";
  os.precision(17);
  for (Eigen::Index j = 0; j < g.np(); ++j)
    for (Eigen::Index i = 0; i < g.nq(); ++i) {
      os << i + g.nq() * j << ',' << g.q(i) << ',' << g.p(j) << ',' << psi(i, j).real() << ',' << psi(i, j).imag() << ',';
      if (f) os << (*f)(i, j);
      os << '\n';
    }
}

}  // namespace momap
