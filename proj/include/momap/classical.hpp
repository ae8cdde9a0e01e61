#pragma once

// Classical phase space: phase functions, Hamiltonian flow, Klimontovich
// ensembles, parameterized point families and strict contact maps.
//
// Phase points are z = (q, p) with d degrees of freedom. The symplectic
// potential is A = -p dq, so dA = dq ^ dp and the bracket is
// {a, b} = a_q b_p - a_p b_q.

#include "momap/cochain.hpp"

#include <algorithm>
#include <functional>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace momap {

struct PhasePoint {
  RVector q;
  RVector p;

  PhasePoint() = default;
  PhasePoint(RVector q_, RVector p_) : q(std::move(q_)), p(std::move(p_)) {
    require(q.size() == p.size() && q.size() >= 1, "phase point: q and p must have the same positive length");
    require(all_finite(q) && all_finite(p), "phase point has non-finite entries");
  }
  PhasePoint(double q_, double p_) : PhasePoint(RVector::Constant(1, q_), RVector::Constant(1, p_)) {}

  Eigen::Index dof() const { return q.size(); }
  RVector stacked() const {
    RVector z(2 * dof());
    z << q, p;
    return z;
  }
  static PhasePoint from_stacked(const RVector& z) {
    require(z.size() % 2 == 0, "stacked phase point needs even length");
    const Eigen::Index d = z.size() / 2;
    return PhasePoint(z.head(d), z.tail(d));
  }
};

/// Scalar function on phase space of the form sum_a h(q_a, p_a) (or h on a
/// single degree of freedom) with h(q,p) = sum_ij c_ij q^i p^j - g cos q.
/// Serves as Hamiltonian and as test function.
class PhaseFunction {
 public:
  PhaseFunction() : coeffs_(RMatrix::Zero(1, 1)) {}
  PhaseFunction(std::string name, RMatrix coeffs, double cosine = 0.0, int dof = -1)
      : name_(std::move(name)), coeffs_(std::move(coeffs)), cosine_(cosine), dof_(dof) {
    require(coeffs_.size() >= 1 && all_finite(coeffs_) && std::isfinite(cosine_), "phase function: bad coefficients");
    verify_gradients();
  }

  static PhaseFunction polynomial(const RMatrix& c, std::string name = "polynomial") { return {std::move(name), c}; }
  static PhaseFunction constant(double c) { return polynomial(RMatrix::Constant(1, 1, c), "constant"); }
  static PhaseFunction coordinate() { return monomial(1, 0, 1.0, "q"); }
  static PhaseFunction momentum() { return monomial(0, 1, 1.0, "p"); }
  static PhaseFunction monomial(int i, int j, double c = 1.0, std::string name = "monomial") {
    RMatrix m = RMatrix::Zero(i + 1, j + 1);
    m(i, j) = c;
    return polynomial(m, std::move(name));
  }
  /// (p^2 + omega^2 q^2) / 2
  static PhaseFunction harmonic(double omega = 1.0) {
    RMatrix m = RMatrix::Zero(3, 3);
    m(0, 2) = 0.5;
    m(2, 0) = 0.5 * omega * omega;
    return {"harmonic", m};
  }
  static PhaseFunction free_particle() { return monomial(0, 2, 0.5, "free"); }
  /// p^2/2 - g cos q
  static PhaseFunction pendulum(double g = 1.0) { return {"pendulum", monomial(0, 2, 0.5).coeffs_, g}; }
  /// p^2/2 + lambda q^4/4
  static PhaseFunction quartic(double lambda = 1.0) {
    RMatrix m = RMatrix::Zero(5, 3);
    m(0, 2) = 0.5;
    m(4, 0) = 0.25 * lambda;
    return {"quartic", m};
  }
  /// alpha q + beta p
  static PhaseFunction linear(double alpha, double beta) {
    RMatrix m = RMatrix::Zero(2, 2);
    m(1, 0) = alpha;
    m(0, 1) = beta;
    return {"linear", m};
  }

  /// Same function restricted to degree of freedom a.
  PhaseFunction on_dof(int a) const {
    PhaseFunction f = *this;
    f.dof_ = a;
    return f;
  }

  const std::string& name() const { return name_; }
  const RMatrix& coefficients() const { return coeffs_; }
  double cosine() const { return cosine_; }
  int dof() const { return dof_; }
  bool is_polynomial() const { return cosine_ == 0.0; }
  /// No mixed q^i p^j terms: h = T(p) + V(q).
  bool separable() const {
    for (Eigen::Index i = 1; i < coeffs_.rows(); ++i)
      for (Eigen::Index j = 1; j < coeffs_.cols(); ++j)
        if (coeffs_(i, j) != 0.0) return false;
    return true;
  }

  double value(double q, double p) const { return eval(q, p, 0, 0) - cosine_ * std::cos(q); }
  double dq(double q, double p) const { return eval(q, p, 1, 0) + cosine_ * std::sin(q); }
  double dp(double q, double p) const { return eval(q, p, 0, 1); }

  double operator()(const PhasePoint& z) const {
    double s = 0.0;
    for_dofs(z.dof(), [&](Eigen::Index a) { s += value(z.q(a), z.p(a)); });
    return s;
  }
  RVector grad_q(const PhasePoint& z) const {
    RVector g = RVector::Zero(z.dof());
    for_dofs(z.dof(), [&](Eigen::Index a) { g(a) = dq(z.q(a), z.p(a)); });
    return g;
  }
  RVector grad_p(const PhasePoint& z) const {
    RVector g = RVector::Zero(z.dof());
    for_dofs(z.dof(), [&](Eigen::Index a) { g(a) = dp(z.q(a), z.p(a)); });
    return g;
  }

  friend PhaseFunction operator+(const PhaseFunction& a, const PhaseFunction& b) {
    require(a.dof_ == b.dof_, "phase function sum: degree-of-freedom mismatch");
    RMatrix c = RMatrix::Zero(std::max(a.coeffs_.rows(), b.coeffs_.rows()), std::max(a.coeffs_.cols(), b.coeffs_.cols()));
    c.topLeftCorner(a.coeffs_.rows(), a.coeffs_.cols()) += a.coeffs_;
    c.topLeftCorner(b.coeffs_.rows(), b.coeffs_.cols()) += b.coeffs_;
    return PhaseFunction(a.name_ + "+" + b.name_, c, a.cosine_ + b.cosine_, a.dof_);
  }
  friend PhaseFunction operator*(double s, const PhaseFunction& a) {
    return PhaseFunction(a.name_, s * a.coeffs_, s * a.cosine_, a.dof_);
  }

  /// Closed-form bracket of two polynomial phase functions.
  friend PhaseFunction poisson_bracket(const PhaseFunction& a, const PhaseFunction& b) {
    require(a.is_polynomial() && b.is_polynomial(), "closed-form bracket needs polynomial phase functions");
    int dof = a.dof_;
    if (a.dof_ != b.dof_) {
      if (a.dof_ >= 0 && b.dof_ >= 0) return constant(0.0);
      dof = std::max(a.dof_, b.dof_);
    }
    const RMatrix& A = a.coeffs_;
    const RMatrix& B = b.coeffs_;
    RMatrix c = RMatrix::Zero(A.rows() + B.rows(), A.cols() + B.cols());
    for (Eigen::Index i = 0; i < A.rows(); ++i)
      for (Eigen::Index j = 0; j < A.cols(); ++j)
        for (Eigen::Index k = 0; k < B.rows(); ++k)
          for (Eigen::Index l = 0; l < B.cols(); ++l) {
            const double ab = A(i, j) * B(k, l);
            if (ab == 0.0) continue;
            // q^i p^j and q^k p^l: (i l - j k) q^{i+k-1} p^{j+l-1}
            const double f = static_cast<double>(i * l - j * k);
            if (f != 0.0) c(i + k - 1, j + l - 1) += f * ab;
          }
    PhaseFunction out("{" + a.name_ + "," + b.name_ + "}", c, 0.0, dof);
    return out;
  }

 private:
  template <class F>
  void for_dofs(Eigen::Index d, F&& f) const {
    if (dof_ >= 0) {
      require(dof_ < d, "phase function refers to a missing degree of freedom");
      f(dof_);
      return;
    }
    for (Eigen::Index a = 0; a < d; ++a) f(a);
  }

  /// d^{dq+dp} / dq^dq dp^dp of the polynomial part (dq, dp in {0,1}).
  double eval(double q, double p, int dq_order, int dp_order) const {
    double s = 0.0;
    for (Eigen::Index i = dq_order; i < coeffs_.rows(); ++i) {
      const double qi = (dq_order ? static_cast<double>(i) : 1.0) * std::pow(q, static_cast<double>(i - dq_order));
      for (Eigen::Index j = dp_order; j < coeffs_.cols(); ++j) {
        if (coeffs_(i, j) == 0.0) continue;
        s += coeffs_(i, j) * qi * (dp_order ? static_cast<double>(j) : 1.0) * std::pow(p, static_cast<double>(j - dp_order));
      }
    }
    return s;
  }

  void verify_gradients() const {
    static constexpr double probes[][2] = {{0.31, -0.72}, {1.13, 0.41}, {-0.87, 1.29}};
    const double h = 1e-5;
    for (const auto& z : probes) {
      const double fq = (value(z[0] + h, z[1]) - value(z[0] - h, z[1])) / (2 * h);
      const double fp = (value(z[0], z[1] + h) - value(z[0], z[1] - h)) / (2 * h);
      const double scale = std::max({1.0, std::abs(fq), std::abs(fp), coeffs_.cwiseAbs().maxCoeff()});
      if (std::abs(fq - dq(z[0], z[1])) > 1e-6 * scale || std::abs(fp - dp(z[0], z[1])) > 1e-6 * scale)
        throw InputError("phase function '" + name_ + "': analytic gradient disagrees with finite differences");
    }
  }

  std::string name_ = "zero";
  RMatrix coeffs_;
  double cosine_ = 0.0;
  int dof_ = -1;
};

using HamiltonianSpec = PhaseFunction;
using TestFunction = PhaseFunction;

/// Pointwise {a, b}(z) from analytic gradients.
inline double poisson_bracket_at(const PhaseFunction& a, const PhaseFunction& b, const PhasePoint& z) {
  return a.grad_q(z).dot(b.grad_p(z)) - a.grad_p(z).dot(b.grad_q(z));
}

// ---------------------------------------------------------------------------
// Hamiltonian flow

enum class Integrator { verlet, midpoint, rk4 };

inline std::string to_string(Integrator i) {
  switch (i) {
    case Integrator::verlet: return "verlet";
    case Integrator::midpoint: return "midpoint";
    case Integrator::rk4: return "rk4";
  }
  return "?";
}

namespace detail {

inline RVector hamilton_vector_field(const PhaseFunction& h, const RVector& z) {
  const PhasePoint pt = PhasePoint::from_stacked(z);
  RVector v(z.size());
  v << h.grad_p(pt), -h.grad_q(pt);
  return v;
}

}  // namespace detail

/// One step of size dt (dt may be negative; all three schemes are defined for it).
inline PhasePoint hamilton_step(const PhasePoint& z, const PhaseFunction& h, double dt, Integrator integ) {
  switch (integ) {
    case Integrator::verlet: {
      PhasePoint out = z;
      out.p -= 0.5 * dt * h.grad_q(out);
      out.q += dt * h.grad_p(out);
      out.p -= 0.5 * dt * h.grad_q(out);
      return out;
    }
    case Integrator::midpoint: {
      const RVector z0 = z.stacked();
      RVector z1 = z0 + dt * detail::hamilton_vector_field(h, z0);
      for (int it = 0; it < 200; ++it) {
        const RVector next = z0 + dt * detail::hamilton_vector_field(h, 0.5 * (z0 + z1));
        const double change = (next - z1).cwiseAbs().maxCoeff();
        z1 = next;
        if (change <= 1e-15 * std::max(1.0, z1.cwiseAbs().maxCoeff())) return PhasePoint::from_stacked(z1);
      }
      throw DivergenceError("implicit midpoint iteration did not converge; reduce dt", std::abs(dt));
    }
    case Integrator::rk4: {
      const RVector z0 = z.stacked();
      const RVector k1 = detail::hamilton_vector_field(h, z0);
      const RVector k2 = detail::hamilton_vector_field(h, z0 + 0.5 * dt * k1);
      const RVector k3 = detail::hamilton_vector_field(h, z0 + 0.5 * dt * k2);
      const RVector k4 = detail::hamilton_vector_field(h, z0 + dt * k3);
      return PhasePoint::from_stacked(z0 + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4));
    }
  }
  return z;
}

/// Number of steps and the (signed) step used to reach time t with |step| <= dt.
inline std::pair<long, double> step_plan(double t, double dt) {
  require(dt > 0.0 && std::isfinite(dt), "dt must be positive");
  require(std::isfinite(t), "t must be finite");
  if (t == 0.0) return {0, 0.0};
  const long n = std::max(1L, static_cast<long>(std::ceil(std::abs(t) / dt - 1e-9)));
  return {n, t / static_cast<double>(n)};
}

inline PhasePoint hamilton_flow(const PhasePoint& z0, const PhaseFunction& h, double t, double dt,
                                Integrator integ = Integrator::verlet) {
  if (integ == Integrator::verlet && !h.separable())
    throw InputError("verlet needs a separable Hamiltonian; '" + h.name() + "' has mixed q-p terms");
  const auto [n, step] = step_plan(t, dt);
  PhasePoint z = z0;
  for (long k = 0; k < n; ++k) z = hamilton_step(z, h, step, integ);
  return z;
}

// ---------------------------------------------------------------------------
// Klimontovich ensembles

/// f = sum_k w_k delta(z - z_k). Carries the symplectic form sum_k w_k dq_k ^ dp_k.
struct WeightedEnsemble {
  RVector weights;
  std::vector<PhasePoint> points;

  WeightedEnsemble() = default;
  WeightedEnsemble(RVector w, std::vector<PhasePoint> z) : weights(std::move(w)), points(std::move(z)) {
    require(weights.size() == static_cast<Eigen::Index>(points.size()) && !points.empty(),
            "ensemble: one weight per point required");
    require(all_finite(weights) && weights.minCoeff() > 0.0, "ensemble weights must be positive");
    for (const auto& p : points) require(p.dof() == points.front().dof(), "ensemble: mixed degrees of freedom");
  }

  std::size_t size() const { return points.size(); }
  Eigen::Index dof() const { return points.front().dof(); }
  double weight_sum() const { return weights.sum(); }
  bool admissible(double tol = 1e-12) const { return std::abs(weight_sum() - 1.0) <= tol; }
};

inline WeightedEnsemble hamilton_flow(const WeightedEnsemble& e, const PhaseFunction& h, double t, double dt,
                                      Integrator integ = Integrator::verlet) {
  std::vector<PhasePoint> out;
  out.reserve(e.size());
  for (const auto& z : e.points) out.push_back(hamilton_flow(z, h, t, dt, integ));
  return WeightedEnsemble(e.weights, std::move(out));
}

/// <f, phi> = sum_k w_k phi(z_k).
template <class F>
double ensemble_pairing(const WeightedEnsemble& e, const F& phi) {
  double s = 0.0;
  for (std::size_t k = 0; k < e.size(); ++k) s += e.weights(static_cast<Eigen::Index>(k)) * phi(e.points[k]);
  return s;
}

/// |(<f(t+2dt),phi> - <f(t-2dt),phi>) / 4dt - <f(t), {phi,H}>| with the
/// ensemble carried by integrator steps of size dt. The difference spans two
/// steps: over a single Stormer-Verlet step q_{n+1} - q_{n-1} = 2 dt p_n holds
/// identically, which would hide the integrator error for phi = q.
inline double weak_liouville_residual(const WeightedEnsemble& e0, const PhaseFunction& h, const PhaseFunction& phi,
                                      double t, double dt, Integrator integ = Integrator::verlet) {
  const WeightedEnsemble minus = hamilton_flow(e0, h, t - 2 * dt, dt, integ);
  const WeightedEnsemble now = hamilton_flow(minus, h, 2 * dt, dt, integ);
  const WeightedEnsemble plus = hamilton_flow(now, h, 2 * dt, dt, integ);
  const double ddt = (ensemble_pairing(plus, phi) - ensemble_pairing(minus, phi)) / (4 * dt);
  const double bracket = ensemble_pairing(now, [&](const PhasePoint& z) { return poisson_bracket_at(phi, h, z); });
  return std::abs(ddt - bracket);
}

/// CSV with header w,q0..q{d-1},p0..p{d-1}.
inline void write_ensemble_csv(std::ostream& os, const WeightedEnsemble& e) {
  os << "w";
  for (Eigen::Index a = 0; a < e.dof(); ++a) os << ",q" << a;
  for (Eigen::Index a = 0; a < e.dof(); ++a) os << ",p" << a;
  os << '\n';
  os.precision(17);
  for (std::size_t k = 0; k < e.size(); ++k) {
    os << e.weights(static_cast<Eigen::Index>(k));
    for (Eigen::Index a = 0; a < e.dof(); ++a) os << ',' << e.points[k].q(a);
    for (Eigen::Index a = 0; a < e.dof(); ++a) os << ',' << e.points[k].p(a);
    os << '\n';
  }
}

inline WeightedEnsemble read_ensemble_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw InputError("ensemble csv: missing header");
  const auto cols = static_cast<Eigen::Index>(std::count(line.begin(), line.end(), ',') + 1);
  if (cols < 3 || cols % 2 == 0) throw InputError("ensemble csv: header must be w,q...,p...");
  const Eigen::Index d = (cols - 1) / 2;
  std::vector<double> w;
  std::vector<PhasePoint> pts;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    RVector row(cols);
    Eigen::Index c = 0;
    while (std::getline(ss, cell, ',')) {
      if (c >= cols) throw InputError("ensemble csv: too many columns");
      try {
        row(c++) = std::stod(cell);
      } catch (const std::exception&) {
        throw InputError("ensemble csv: cannot parse '" + cell + "'");
      }
    }
    if (c != cols) throw InputError("ensemble csv: too few columns");
    w.push_back(row(0));
    pts.emplace_back(row.segment(1, d), row.segment(1 + d, d));
  }
  return WeightedEnsemble(Eigen::Map<RVector>(w.data(), static_cast<Eigen::Index>(w.size())), std::move(pts));
}

// ---------------------------------------------------------------------------
// Parameterized point families

struct ParamPointFamily {
  ParameterGrid grid;
  WeightDensity weight;
  RMatrix q;  // d x node_count
  RMatrix p;

  ParamPointFamily() = default;
  ParamPointFamily(WeightDensity w, RMatrix q_, RMatrix p_)
      : grid(w.grid), weight(std::move(w)), q(std::move(q_)), p(std::move(p_)) {
    require(q.cols() == grid.node_count() && p.cols() == grid.node_count() && q.rows() == p.rows() && q.rows() >= 1,
            "point family size does not match grid");
    require(all_finite(q) && all_finite(p), "point family has non-finite entries");
  }

  template <class F>
  static ParamPointFamily from_function(const WeightDensity& w, Eigen::Index d, F&& f) {
    RMatrix q(d, w.grid.node_count()), p(d, w.grid.node_count());
    for (Eigen::Index x = 0; x < w.grid.node_count(); ++x) {
      const PhasePoint z = f(w.grid.point(x));
      q.col(x) = z.q;
      p.col(x) = z.p;
    }
    return ParamPointFamily(w, std::move(q), std::move(p));
  }

  PhasePoint point(Eigen::Index x) const { return PhasePoint(q.col(x), p.col(x)); }
};

inline ParamPointFamily hamilton_flow(const ParamPointFamily& fam, const PhaseFunction& h, double t, double dt,
                                      Integrator integ = Integrator::verlet) {
  ParamPointFamily out = fam;
  for (Eigen::Index x = 0; x < fam.grid.node_count(); ++x) {
    const PhasePoint z = hamilton_flow(fam.point(x), h, t, dt, integ);
    out.q.col(x) = z.q;
    out.p.col(x) = z.p;
  }
  return out;
}

/// Plaquette values of sum_a dq^a ^ dp_a, as d of the edge cochain
/// -1/2 (p_tail + p_head)(q_head - q_tail), i.e. the signed area of the
/// image quadrilateral in each (q^a, p_a) plane.
inline Cochain param_right_leg(const ParamPointFamily& fam) {
  const auto& g = fam.grid;
  if (g.dim() != 2) throw InputError("param_right_leg needs a two-dimensional parameter grid");
  Cochain a(g, 1);
  for (int j = 0; j < 2; ++j)
    for (Eigen::Index x = 0; x < g.node_count(); ++x) {
      if (!a.valid(j, x)) continue;
      const Eigen::Index y = *g.shift(x, j, 1);
      a(j, x) = -0.5 * (fam.p.col(x) + fam.p.col(y)).dot(fam.q.col(y) - fam.q.col(x));
    }
  return exterior_derivative(a);
}

// ---------------------------------------------------------------------------
// Strict contact maps (eta, e^{i kappa}) with affine eta(z) = M z + c

/// Canonical 2d x 2d matrix [[0, 1], [-1, 0]] in (q, p) block order.
inline RMatrix canonical_matrix(Eigen::Index d) {
  RMatrix j = RMatrix::Zero(2 * d, 2 * d);
  j.topRightCorner(d, d).setIdentity();
  j.bottomLeftCorner(d, d) = -RMatrix::Identity(d, d);
  return j;
}

struct CanonicalMap {
  enum class Kind { identity, translation, rotation, shear, linear_symplectic, composition };

  Kind kind = Kind::identity;
  RMatrix matrix;  // acts on stacked (q, p)
  RVector offset;
  /// Circle element; kept unreduced so phases compare without wrap-around.
  double kappa = 0.0;

  CanonicalMap() = default;
  CanonicalMap(Kind k, RMatrix m, RVector c, double kap = 0.0)
      : kind(k), matrix(std::move(m)), offset(std::move(c)), kappa(kap) {
    require(matrix.rows() == matrix.cols() && matrix.rows() % 2 == 0 && offset.size() == matrix.rows(),
            "canonical map: matrix must be 2d x 2d with matching offset");
    require(all_finite(matrix) && all_finite(offset) && std::isfinite(kappa), "canonical map has non-finite entries");
    const RMatrix jm = canonical_matrix(dof());
    if (max_abs(matrix.transpose() * jm * matrix - jm) > 1e-10)
      throw InputError("canonical map: Jacobian is not symplectic");
  }

  static CanonicalMap identity(Eigen::Index d = 1) {
    return {Kind::identity, RMatrix::Identity(2 * d, 2 * d), RVector::Zero(2 * d)};
  }
  /// (q, p) -> (q + a, p + b)
  static CanonicalMap translation(const RVector& a, const RVector& b) {
    require(a.size() == b.size(), "translation: q and p shifts differ in length");
    RVector c(2 * a.size());
    c << a, b;
    return {Kind::translation, RMatrix::Identity(c.size(), c.size()), c};
  }
  static CanonicalMap translation(double a, double b) { return translation(RVector::Constant(1, a), RVector::Constant(1, b)); }
  /// Clockwise rotation by theta in every (q_a, p_a) plane: the harmonic flow for time theta.
  static CanonicalMap rotation(double theta, Eigen::Index d = 1) {
    RMatrix m(2 * d, 2 * d);
    const RMatrix id = RMatrix::Identity(d, d);
    m << std::cos(theta) * id, std::sin(theta) * id, -std::sin(theta) * id, std::cos(theta) * id;
    return {Kind::rotation, m, RVector::Zero(2 * d)};
  }
  /// (q, p) -> (q + s p, p): the free flow for time s.
  static CanonicalMap shear(double s, Eigen::Index d = 1) {
    RMatrix m = RMatrix::Identity(2 * d, 2 * d);
    m.topRightCorner(d, d) = s * RMatrix::Identity(d, d);
    return {Kind::shear, m, RVector::Zero(2 * d)};
  }
  static CanonicalMap linear_symplectic(const RMatrix& m) {
    return {Kind::linear_symplectic, m, RVector::Zero(m.rows())};
  }

  Eigen::Index dof() const { return matrix.rows() / 2; }

  PhasePoint operator()(const PhasePoint& z) const {
    require(z.dof() == dof(), "canonical map: degree-of-freedom mismatch");
    return PhasePoint::from_stacked(matrix * z.stacked() + offset);
  }
  RVector apply(const RVector& z) const { return matrix * z + offset; }

  CanonicalMap inverse() const {
    const RMatrix mi = matrix.inverse();
    return {kind, mi, -mi * offset, 0.0};
  }

  std::string kind_name() const {
    switch (kind) {
      case Kind::identity: return "identity";
      case Kind::translation: return "translation";
      case Kind::rotation: return "rotation";
      case Kind::shear: return "shear";
      case Kind::linear_symplectic: return "linear-symplectic";
      case Kind::composition: return "composition";
    }
    return "?";
  }
};

namespace detail {

inline double gauss_segment(const std::function<double(double)>& f, double a, double b) {
  static constexpr double x[] = {0.0, 0.5384693101056831, 0.9061798459386640};
  static constexpr double w[] = {0.5688888888888889, 0.4786286704993665, 0.2369268850561891};
  const double m = 0.5 * (a + b), r = 0.5 * (b - a);
  double s = w[0] * f(m);
  for (int k = 1; k < 3; ++k) s += w[k] * (f(m - r * x[k]) + f(m + r * x[k]));
  return r * s;
}

inline double adaptive_gauss(const std::function<double(double)>& f, double a, double b, double whole, double tol,
                             int depth) {
  const double m = 0.5 * (a + b);
  const double left = gauss_segment(f, a, m), right = gauss_segment(f, m, b);
  if (std::abs(left + right - whole) <= tol) return left + right;
  if (depth == 0) throw DivergenceError("adaptive quadrature did not converge", tol);
  return adaptive_gauss(f, a, m, left, 0.5 * tol, depth - 1) + adaptive_gauss(f, m, b, right, 0.5 * tol, depth - 1);
}

/// int of the 1-form (eta^* A - A) along the straight segment a -> b, A = -p dq.
inline double cocycle_segment(const CanonicalMap& eta, const RVector& a, const RVector& b) {
  const Eigen::Index d = eta.dof();
  const RVector v = b - a;
  const RVector mv = eta.matrix * v;
  auto integrand = [&](double s) {
    const RVector y = a + s * v;
    const RVector ey = eta.apply(y);
    return -ey.tail(d).dot(mv.head(d)) + y.tail(d).dot(v.head(d));
  };
  const double whole = gauss_segment(integrand, 0.0, 1.0);
  const double scale = std::max(1.0, std::abs(whole));
  return adaptive_gauss(integrand, 0.0, 1.0, whole, 1e-13 * scale, 30);
}

}  // namespace detail

/// Difference between the straight path 0 -> z and the path 0 -> (q, 0) -> z.
inline double cocycle_path_defect(const CanonicalMap& eta, const PhasePoint& z) {
  const RVector zs = z.stacked();
  RVector corner = zs;
  corner.tail(z.dof()).setZero();
  const RVector origin = RVector::Zero(zs.size());
  const double straight = detail::cocycle_segment(eta, origin, zs);
  const double bent = detail::cocycle_segment(eta, origin, corner) + detail::cocycle_segment(eta, corner, zs);
  return std::abs(straight - bent);
}

/// int_0^z (eta^* A - A) along the straight segment; path independence is checked.
inline double cocycle_integral(const CanonicalMap& eta, const PhasePoint& z) {
  require(z.dof() == eta.dof(), "cocycle_integral: degree-of-freedom mismatch");
  const double v = detail::cocycle_segment(eta, RVector::Zero(2 * z.dof()), z.stacked());
  const double defect = cocycle_path_defect(eta, z);
  if (defect > 1e-8 * std::max(1.0, std::abs(v)))
    throw DivergenceError("cocycle integral is path dependent; map is not canonical", defect);
  return v;
}

/// (eta1, kappa1)(eta2, kappa2) = (eta1 o eta2, kappa1 + kappa2 + int_0^{eta2(0)} (eta1^* A - A)).
inline CanonicalMap group_compose(const CanonicalMap& g1, const CanonicalMap& g2) {
  require(g1.dof() == g2.dof(), "group_compose: degree-of-freedom mismatch");
  if (g2.kind == CanonicalMap::Kind::identity && g2.kappa == 0.0) return g1;
  if (g1.kind == CanonicalMap::Kind::identity && g1.kappa == 0.0) return g2;
  const double phase = cocycle_integral(g1, PhasePoint::from_stacked(g2.offset));
  const auto kind = g1.kind == g2.kind && g1.kind == CanonicalMap::Kind::translation
                        ? CanonicalMap::Kind::translation
                        : CanonicalMap::Kind::composition;
  return CanonicalMap(kind, g1.matrix * g2.matrix, g1.matrix * g2.offset + g1.offset, g1.kappa + g2.kappa + phase);
}

inline WeightedEnsemble push_forward(const CanonicalMap& eta, const WeightedEnsemble& e) {
  std::vector<PhasePoint> out;
  out.reserve(e.size());
  for (const auto& z : e.points) out.push_back(eta(z));
  return WeightedEnsemble(e.weights, std::move(out));
}

}  // namespace momap
