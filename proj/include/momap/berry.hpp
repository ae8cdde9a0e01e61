#pragma once

// Berry connection A = <psi| -i hbar d psi> and curvature B = dA on a
// parameter grid, viewed as the momentum map for volume-preserving
// reparameterizations of a wave family; stream-function generators
// xi = w^{-1} delta gamma and the pairing identity <dA, gamma> = -1/2 Omega(xi psi, psi).

#include "momap/cochain.hpp"
#include "momap/mixtures.hpp"

#include <functional>
#include <optional>
#include <vector>

namespace momap {

enum class CurvatureBackend {
  /// d of the link connection hbar Im<psi_tail|psi_head>, evaluated per
  /// plaquette after fixing the phases of the corner states against the
  /// anchor corner. Gauge invariant; converges to the smooth curvature at O(h^2).
  fd_connection,
  /// hbar arg of the Wilson loop around the plaquette; total flux on a closed
  /// grid is an exact multiple of 2 pi hbar.
  wilson_loop,
};

namespace detail {

inline void require_resolved_grid(const ParameterGrid& g) {
  for (int j = 0; j < g.dim(); ++j)
    if (g.count(j) < 4) throw InputError("berry: parameter grid needs at least 4 nodes per axis");
}

}  // namespace detail

/// A_j(x) = hbar Im <psi(x) | psi(x+e_j) - psi(x)>.
inline Cochain berry_connection(const WaveFamily& fam) {
  const auto& g = fam.grid;
  detail::require_resolved_grid(g);
  Cochain a(g, 1);
  for (int j = 0; j < g.dim(); ++j)
    for (Eigen::Index x = 0; x < g.node_count(); ++x) {
      if (!a.valid(j, x)) continue;
      const Eigen::Index y = *g.shift(x, j, 1);
      a(j, x) = fam.hbar * fam.states.col(x).dot(fam.states.col(y) - fam.states.col(x)).imag();
    }
  return a;
}

namespace detail {

inline void require_nonzero_states(const WaveFamily& fam) {
  const RVector n = fam.states.colwise().norm();
  if (!(n.minCoeff() > 0.0)) throw InputError("berry_curvature: zero-norm state, Wilson loop undefined");
}

inline CVector align_phase(const CVector& anchor, const CVector& v) {
  const Complex o = anchor.dot(v);
  if (std::abs(o) == 0.0) return v;
  return v * std::conj(o / std::abs(o));
}

}  // namespace detail

inline Cochain berry_curvature(const WaveFamily& fam, CurvatureBackend backend = CurvatureBackend::fd_connection) {
  const auto& g = fam.grid;
  require(g.dim() >= 2, "berry_curvature needs a parameter grid of dimension >= 2");
  detail::require_resolved_grid(g);
  detail::require_nonzero_states(fam);
  Cochain b(g, 2);
  for (int comp = 0; comp < b.components(); ++comp) {
    const auto [j, l] = Cochain::plane_axes(comp);
    for (Eigen::Index x = 0; x < g.node_count(); ++x) {
      if (!b.valid(comp, x)) continue;
      const Eigen::Index xj = *g.shift(x, j, 1);
      const Eigen::Index xl = *g.shift(x, l, 1);
      const Eigen::Index xjl = *g.shift(xj, l, 1);
      const CVector& p00 = fam.states.col(x);
      if (backend == CurvatureBackend::wilson_loop) {
        const Complex loop = p00.dot(fam.states.col(xj)) * fam.states.col(xj).dot(fam.states.col(xjl)) *
                             fam.states.col(xjl).dot(fam.states.col(xl)) * fam.states.col(xl).dot(p00);
        b(comp, x) = fam.hbar * std::arg(loop);
      } else {
        const CVector p10 = detail::align_phase(p00, fam.states.col(xj));
        const CVector p01 = detail::align_phase(p00, fam.states.col(xl));
        const CVector p11 = detail::align_phase(p00, fam.states.col(xjl));
        b(comp, x) = fam.hbar * (p00.dot(p10 - p00).imag() + p10.dot(p11 - p10).imag() -
                                 p01.dot(p11 - p01).imag() - p00.dot(p01 - p00).imag());
      }
    }
  }
  return b;
}

/// Sum of plaquette values over the whole grid or a plaquette mask.
inline double total_flux(const Cochain& b, const std::optional<Eigen::Array<bool, Eigen::Dynamic, 1>>& mask = std::nullopt,
                         int component = 0) {
  require(b.degree() == 2, "total_flux needs a 2-cochain");
  if (mask) require(mask->size() == b.grid().node_count(), "total_flux: mask size does not match grid");
  double s = 0.0;
  Eigen::Index cells = 0;
  for (Eigen::Index x = 0; x < b.grid().node_count(); ++x) {
    if (!b.valid(component, x) || (mask && !(*mask)(x))) continue;
    s += b(component, x);
    ++cells;
  }
  if (cells == 0) throw InputError("total_flux: empty region");
  return s;
}

/// 2-cochain gamma_p = g(plaquette centre) * h_0 h_1 from a stream potential g.
inline Cochain two_form_from_potential(const ParameterGrid& grid, const std::function<double(double, double)>& g) {
  require(grid.dim() == 2, "stream functions are supported on two-dimensional grids");
  Cochain gamma(grid, 2);
  const double h0 = grid.spacing(0), h1 = grid.spacing(1);
  for (Eigen::Index x = 0; x < grid.node_count(); ++x)
    if (gamma.valid(0, x)) gamma(0, x) = g(grid.coordinate(x, 0) + 0.5 * h0, grid.coordinate(x, 1) + 0.5 * h1) * h0 * h1;
  return gamma;
}

/// Divergence-free (w.r.t. w) vector field at the nodes.
struct VolVectorField {
  WeightDensity weight;
  RMatrix values;  // 2 x node_count

  /// Discrete div(w xi) per plaquette; vanishes identically on periodic grids
  /// for fields built by stream_vector_field.
  Eigen::ArrayXd weighted_divergence() const {
    const auto& g = weight.grid;
    const double h0 = g.spacing(0), h1 = g.spacing(1);
    Eigen::ArrayXd div = Eigen::ArrayXd::Zero(g.node_count());
    auto f = [&](int c, std::optional<Eigen::Index> y) { return y ? weight.values(*y) * values(c, *y) : 0.0; };
    for (Eigen::Index p = 0; p < g.node_count(); ++p) {
      const auto p0 = g.shift(p, 0, 1);
      const auto p1 = g.shift(p, 1, 1);
      if (!p0 || !p1) continue;
      const auto p01 = g.shift(*p0, 1, 1);
      div(p) = ((f(0, p0) + f(0, p01)) - (f(0, p) + f(0, p1))) / (2 * h0) +
               ((f(1, p1) + f(1, p01)) - (f(1, p) + f(1, p0))) / (2 * h1);
    }
    return div;
  }

  /// max |div(w xi)| relative to max |w xi| / h.
  double divergence_residual() const {
    const auto& g = weight.grid;
    double flux = 0.0;
    for (Eigen::Index x = 0; x < g.node_count(); ++x)
      flux = std::max(flux, weight.values(x) * values.col(x).cwiseAbs().maxCoeff());
    if (flux == 0.0) return 0.0;
    const double h = std::min(g.spacing(0), g.spacing(1));
    return weighted_divergence().abs().maxCoeff() * h / flux;
  }
};

/// xi = w^{-1} (D_1 g, -D_0 g) with g = gamma / (h_0 h_1), differenced from
/// the four plaquettes around each node.
inline VolVectorField stream_vector_field(const Cochain& gamma, const WeightDensity& w) {
  const auto& g = gamma.grid();
  require(gamma.degree() == 2, "stream_vector_field needs a 2-cochain");
  require(g.dim() == 2, "stream functions are supported on two-dimensional grids");
  require_same_grid(g, w.grid, "stream_vector_field");
  if (!(w.values.minCoeff() > 0.0)) throw InputError("stream_vector_field: weight vanishes at a node");
  const double h0 = g.spacing(0), h1 = g.spacing(1), area = h0 * h1;
  auto pot = [&](std::optional<Eigen::Index> p) { return p && gamma.valid(0, *p) ? gamma(0, *p) / area : 0.0; };
  VolVectorField out{w, RMatrix::Zero(2, g.node_count())};
  for (Eigen::Index x = 0; x < g.node_count(); ++x) {
    const auto xm0 = g.shift(x, 0, -1);
    const auto xm1 = g.shift(x, 1, -1);
    const auto xm01 = xm0 ? g.shift(*xm0, 1, -1) : std::nullopt;
    const double g00 = pot(x), g10 = pot(xm0), g01 = pot(xm1), g11 = pot(xm01);
    const double d0 = ((g00 + g01) - (g10 + g11)) / (2 * h0);
    const double d1 = ((g00 + g10) - (g01 + g11)) / (2 * h1);
    out.values(0, x) = d1 / w.values(x);
    out.values(1, x) = -d0 / w.values(x);
  }
  return out;
}

/// Infinitesimal right action psi -> xi . grad psi with centered differences.
inline WaveFamily transport_generator(const VolVectorField& xi, const WaveFamily& fam) {
  const auto& g = fam.grid;
  require_same_grid(g, xi.weight.grid, "transport_generator");
  CMatrix out = CMatrix::Zero(fam.fibre_dim(), g.node_count());
  for (Eigen::Index x = 0; x < g.node_count(); ++x)
    for (int j = 0; j < 2; ++j) {
      const auto fwd = g.shift(x, j, 1);
      const auto bwd = g.shift(x, j, -1);
      if (!fwd || !bwd) continue;
      out.col(x) += xi.values(j, x) * (fam.states.col(*fwd) - fam.states.col(*bwd)) / (2 * g.spacing(j));
    }
  return WaveFamily(g, std::move(out), fam.hbar);
}

struct PairingCheck {
  double lhs = 0.0;       // <B, gamma> = exact part + harmonic part
  double rhs = 0.0;       // -1/2 Omega(xi psi, psi)
  double harmonic = 0.0;  // mean of the stream potential (periodic grids)
  double harmonic_pairing = 0.0;

  double exact_pairing() const { return lhs - harmonic_pairing; }
  double relative_error() const {
    const double s = std::max(std::abs(lhs), std::abs(rhs));
    return s == 0.0 ? 0.0 : std::abs(lhs - rhs) / s;
  }
};

/// Splits gamma into its exact part (zero-mean potential on periodic grids)
/// and the harmonic constant.
inline std::pair<Cochain, double> exact_part(const Cochain& gamma) {
  const auto& g = gamma.grid();
  if (!g.periodic()) return {gamma, 0.0};
  const double area = g.spacing(0) * g.spacing(1);
  const double mean = gamma.values(0).mean() / area;
  Cochain out = gamma;
  out.values(0) -= mean * area;
  return {out, mean};
}

/// The generator xi only sees gamma modulo constants. When the family has
/// nonzero Chern number its gauge is singular somewhere, and the identity
/// holds for the potential normalized to vanish there; a localized bump
/// away from the singular point is the intended input.
inline PairingCheck right_leg_pairing_check(const WaveFamily& fam, const WeightDensity& w, const Cochain& gamma) {
  const auto& g = fam.grid;
  require(g.dim() == 2, "right_leg_pairing_check is supported on two-dimensional grids");
  require_same_grid(g, gamma.grid(), "right_leg_pairing_check");
  const auto [exact, mean] = exact_part(gamma);
  const Cochain b = berry_curvature(fam, CurvatureBackend::fd_connection);
  const double area = g.spacing(0) * g.spacing(1);
  PairingCheck out;
  for (Eigen::Index p = 0; p < g.node_count(); ++p)
    if (b.valid(0, p)) out.lhs += b(0, p) * gamma(0, p) / area;
  out.harmonic = mean;
  out.harmonic_pairing = mean * total_flux(b);
  const VolVectorField xi = stream_vector_field(exact, w);
  out.rhs = -0.5 * family_symplectic_form(w, transport_generator(xi, fam), fam);
  return out;
}

/// max | d(dA/dt) - d/dt(dA) | with centered time differences; needs >= 3 samples.
inline double faraday_residual(const std::vector<Cochain>& a_series, double dt) {
  if (a_series.size() < 3) throw InputError("faraday_residual needs at least three time samples");
  require(dt > 0.0, "faraday_residual: dt must be positive");
  double res = 0.0;
  for (std::size_t k = 1; k + 1 < a_series.size(); ++k) {
    const Cochain dadt = (1.0 / (2 * dt)) * (a_series[k + 1] - a_series[k - 1]);
    const Cochain lhs = exterior_derivative(dadt);
    const Cochain rhs =
        (1.0 / (2 * dt)) * (exterior_derivative(a_series[k + 1]) - exterior_derivative(a_series[k - 1]));
    res = std::max(res, (lhs - rhs).max_abs());
  }
  return res;
}

/// Degree-one map from the periodic square to the Bloch sphere: lower band of
/// d(k).sigma with d = (sin k0, sin k1, m + cos k0 + cos k1), 0 < m < 2. The
/// chosen section is smooth except at k = (pi, pi).
inline WaveFamily two_level_chern_family(const ParameterGrid& grid, double mass = 1.0, double hbar = 1.0) {
  require(grid.dim() == 2, "two_level_chern_family needs a two-dimensional grid");
  return WaveFamily::from_function(
      grid, 2,
      [mass](const Eigen::Vector3d& r) {
        const double dx = std::sin(r(0)), dy = std::sin(r(1)), dz = mass + std::cos(r(0)) + std::cos(r(1));
        const double d = std::sqrt(dx * dx + dy * dy + dz * dz);
        CVector v(2);
        v << Complex(dx, -dy), Complex(-(dz + d), 0.0);
        return CVector(v.normalized());
      },
      hbar);
}

}  // namespace momap
