#pragma once

// Discrete and continuous quantum mixtures: rho = sum_k w_k psi_k psi_k^dagger,
// rho = int w(r) psi(r) psi(r)^dagger d^n r and multi-family sums, their
// weighted symplectic forms, node-wise unitary evolution and Born-Oppenheimer
// partial traces.

#include "momap/grid.hpp"
#include "momap/quantum.hpp"

#include <algorithm>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace momap {

inline constexpr double default_pnc_tolerance = 1e-8;
inline constexpr double boundary_mass_tolerance = 1e-8;

struct DiscreteMixture {
  std::vector<double> weights;
  std::vector<WaveFunction> states;

  DiscreteMixture() = default;
  DiscreteMixture(std::vector<double> w, std::vector<WaveFunction> s) : weights(std::move(w)), states(std::move(s)) {
    require(!weights.empty(), "mixture needs at least one member");
    require(weights.size() == states.size(), "mixture weights and states differ in length");
    for (double wk : weights)
      if (!(wk > 0.0)) throw InputError("mixture weights must be positive");
    for (const auto& s_k : states) {
      require(s_k.dim() == states.front().dim(), "mixture states must share a dimension");
      require(s_k.hbar == states.front().hbar, "mixture states must share hbar");
    }
  }

  double weight_sum() const {
    double s = 0.0;
    for (double wk : weights) s += wk;
    return s;
  }

  /// Flagged, not enforced: sum w = 1 and every state normalized.
  bool admissible(double tol = 1e-10) const {
    if (std::abs(weight_sum() - 1.0) > tol) return false;
    for (const auto& s_k : states)
      if (!s_k.is_normalized(tol)) return false;
    return true;
  }
};

/// psi(r): one C^m state per grid node, stored column-wise.
struct WaveFamily {
  ParameterGrid grid;
  CMatrix states;  // m x node_count
  double hbar = 1.0;

  WaveFamily() = default;
  WaveFamily(ParameterGrid g, CMatrix s, double h = 1.0) : grid(std::move(g)), states(std::move(s)), hbar(h) {
    require(states.cols() == grid.node_count(), "wave family size does not match grid");
    require(states.rows() >= 1, "wave family needs a positive fibre dimension");
    require(all_finite(states), "wave family has non-finite entries");
    require(hbar > 0.0, "hbar must be positive");
  }

  template <class F>
  static WaveFamily from_function(const ParameterGrid& g, Eigen::Index m, F&& f, double h = 1.0) {
    CMatrix s(m, g.node_count());
    for (Eigen::Index i = 0; i < g.node_count(); ++i) s.col(i) = f(g.point(i));
    return WaveFamily(g, std::move(s), h);
  }

  Eigen::Index fibre_dim() const { return states.rows(); }

  /// max_r | ||psi(r)||^2 - 1 |, the partial-normalization defect.
  double pnc_defect() const {
    return (states.colwise().squaredNorm().array() - 1.0).abs().maxCoeff();
  }
};

struct MultiFamily {
  std::vector<std::pair<WeightDensity, WaveFamily>> members;

  MultiFamily() = default;
  explicit MultiFamily(std::vector<std::pair<WeightDensity, WaveFamily>> m) : members(std::move(m)) {
    require(!members.empty(), "multi-family needs at least one member");
    const auto& g0 = members.front().second.grid;
    const auto m0 = members.front().second.fibre_dim();
    for (const auto& [w, f] : members) {
      require_same_grid(w.grid, g0, "multi-family");
      require_same_grid(f.grid, g0, "multi-family");
      require(f.fibre_dim() == m0, "multi-family members must share the fibre dimension");
    }
  }
};

struct NuclearAmplitude {
  ParameterGrid grid;
  CVector samples;
  double squared_norm = 0.0;

  NuclearAmplitude() = default;
  NuclearAmplitude(ParameterGrid g, CVector s) : grid(std::move(g)), samples(std::move(s)) {
    require(samples.size() == grid.node_count(), "nuclear amplitude size does not match grid");
    require(all_finite(samples), "nuclear amplitude has non-finite entries");
    squared_norm = grid.quadrature_weights().dot(samples.cwiseAbs2());
  }

  WeightDensity density() const { return WeightDensity(grid, samples.cwiseAbs2()); }
};

inline DensityOperator density_from_mixture(const DiscreteMixture& mix) {
  const auto n = mix.states.front().dim();
  CMatrix rho = CMatrix::Zero(n, n);
  for (std::size_t k = 0; k < mix.states.size(); ++k) {
    const CVector& psi = mix.states[k].components;
    rho.noalias() += mix.weights[k] * (psi * psi.adjoint());
  }
  return DensityOperator(rho);
}

inline DensityOperator density_from_family(const WeightDensity& w, const WaveFamily& fam) {
  require_same_grid(w.grid, fam.grid, "density_from_family");
  const RVector q = fam.grid.quadrature_weights();
  const RVector c = q.cwiseProduct(w.values);
  // Fixed node order keeps the reduction deterministic.
  CMatrix rho = fam.states * c.cast<Complex>().asDiagonal() * fam.states.adjoint();
  return DensityOperator(0.5 * (rho + rho.adjoint()));
}

inline DensityOperator density_from_multifamily(const MultiFamily& mf) {
  const auto m = mf.members.front().second.fibre_dim();
  CMatrix rho = CMatrix::Zero(m, m);
  for (const auto& [w, f] : mf.members) rho += density_from_family(w, f).entries;
  return DensityOperator(rho);
}

/// Omega(d1, d2) = 2 hbar Im int w <d1(r)|d2(r)> d^n r.
inline double family_symplectic_form(const WeightDensity& w, const WaveFamily& d1, const WaveFamily& d2) {
  require_same_grid(w.grid, d1.grid, "family_symplectic_form");
  require_same_grid(d1.grid, d2.grid, "family_symplectic_form");
  require(d1.fibre_dim() == d2.fibre_dim(), "family_symplectic_form: fibre dimension mismatch");
  const RVector c = d1.grid.quadrature_weights().cwiseProduct(w.values);
  double acc = 0.0;
  for (Eigen::Index i = 0; i < c.size(); ++i) acc += c(i) * d1.states.col(i).dot(d2.states.col(i)).imag();
  return 2.0 * d1.hbar * acc;
}

inline WaveFamily apply_unitary(const CMatrix& u, const WaveFamily& fam) {
  require(u.rows() == fam.fibre_dim() && u.cols() == fam.fibre_dim(), "apply_unitary: dimension mismatch");
  return WaveFamily(fam.grid, u * fam.states, fam.hbar);
}

inline WaveFamily evolve_family(const WaveFamily& fam, const HermitianOperator& h, double t) {
  require(h.dim() == fam.fibre_dim(), "evolve_family: dimension mismatch");
  return apply_unitary(unitary_propagator(h, t, fam.hbar), fam);
}

/// Diagnostics that degrade exactness claims to warnings.
inline std::vector<std::string> family_warnings(const WeightDensity& w, const WaveFamily& fam,
                                                double pnc_tol = default_pnc_tolerance) {
  std::vector<std::string> out;
  if (const double d = fam.pnc_defect(); d > pnc_tol)
    out.push_back("partial normalization defect " + std::to_string(d) + " exceeds " + std::to_string(pnc_tol));
  if (const double b = w.boundary_mass_fraction(); b > boundary_mass_tolerance)
    out.push_back("weight mass fraction " + std::to_string(b) + " on the open boundary layer");
  return out;
}

/// Grid-data file: node,r0[,r1,r2],w,re_1,im_1,...,re_m,im_m; one row per node.
inline void write_family_csv(std::ostream& os, const WeightDensity& w, const WaveFamily& fam) {
  require_same_grid(w.grid, fam.grid, "write_family_csv");
  const auto& g = fam.grid;
  os << "node";
  for (int j = 0; j < g.dim(); ++j) os << ",r" << j;
  os << ",w";
  for (Eigen::Index a = 1; a <= fam.fibre_dim(); ++a) os << ",re_" << a << ",im_" << a;
  os << '\n';
  os.precision(17);
  for (Eigen::Index x = 0; x < g.node_count(); ++x) {
    os << x;
    for (int j = 0; j < g.dim(); ++j) os << ',' << g.coordinate(x, j);
    os << ',' << w.values(x);
    for (Eigen::Index a = 0; a < fam.fibre_dim(); ++a) os << ',' << fam.states(a, x).real() << ',' << fam.states(a, x).imag();
    os << '\n';
  }
}

/// Reads a grid-data file against a known grid; rows may come in any order
/// but every node must appear once with coordinates matching the grid.
inline std::pair<WeightDensity, WaveFamily> read_family_csv(std::istream& is, const ParameterGrid& g, double hbar = 1.0) {
  std::string line;
  if (!std::getline(is, line) || line.rfind("node", 0) != 0) throw InputError("family csv: expected header starting with node");
  const auto cols = static_cast<Eigen::Index>(std::count(line.begin(), line.end(), ',') + 1);
  const Eigen::Index lead = 2 + g.dim();
  if (cols < lead + 2 || (cols - lead) % 2 != 0) throw InputError("family csv: header does not match the grid dimension");
  const Eigen::Index m = (cols - lead) / 2;
  RVector w = RVector::Zero(g.node_count());
  CMatrix states = CMatrix::Zero(m, g.node_count());
  std::vector<bool> seen(static_cast<std::size_t>(g.node_count()), false);
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> row;
    while (std::getline(ss, cell, ',')) {
      try {
        row.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw InputError("family csv: cannot parse '" + cell + "'");
      }
    }
    if (static_cast<Eigen::Index>(row.size()) != cols) throw InputError("family csv: wrong column count in '" + line + "'");
    const auto x = static_cast<Eigen::Index>(row[0]);
    if (static_cast<double>(x) != row[0] || x < 0 || x >= g.node_count()) throw InputError("family csv: bad node index in '" + line + "'");
    if (seen[static_cast<std::size_t>(x)]) throw InputError("family csv: node " + std::to_string(x) + " listed twice");
    seen[static_cast<std::size_t>(x)] = true;
    for (int j = 0; j < g.dim(); ++j)
      if (std::abs(row[static_cast<std::size_t>(1 + j)] - g.coordinate(x, j)) > 1e-9 * std::max(1.0, std::abs(g.coordinate(x, j))))
        throw InputError("family csv: coordinates of node " + std::to_string(x) + " do not match the grid");
    w(x) = row[static_cast<std::size_t>(1 + g.dim())];
    for (Eigen::Index a = 0; a < m; ++a)
      states(a, x) = Complex(row[static_cast<std::size_t>(lead + 2 * a)], row[static_cast<std::size_t>(lead + 2 * a + 1)]);
  }
  for (std::size_t x = 0; x < seen.size(); ++x)
    if (!seen[x]) throw InputError("family csv: node " + std::to_string(x) + " missing");
  return {WeightDensity(g, std::move(w)), WaveFamily(g, std::move(states), hbar)};
}

struct BornOppenheimerTraces {
  DensityOperator electronic;
  /// rho_n(r, r') on node pairs; only materialized for one-dimensional grids.
  std::optional<CMatrix> nuclear_kernel;
  std::vector<std::string> warnings;

  /// Kernel as a matrix on L^2(grid): K_ij = sqrt(q_i q_j) rho_n(r_i, r_j).
  std::optional<CMatrix> nuclear_operator(const ParameterGrid& grid) const {
    if (!nuclear_kernel) return std::nullopt;
    const RVector s = grid.quadrature_weights().cwiseSqrt();
    CMatrix k = s.cast<Complex>().asDiagonal() * (*nuclear_kernel) * s.cast<Complex>().asDiagonal();
    return k;
  }
};

/// rho_e = int |chi|^2 psi psi^dagger dr and rho_n(r,r') = chi(r) chi*(r') <psi(r')|psi(r)>.
inline BornOppenheimerTraces bo_partial_traces(const NuclearAmplitude& chi, const WaveFamily& fam,
                                               double pnc_tol = default_pnc_tolerance) {
  require_same_grid(chi.grid, fam.grid, "bo_partial_traces");
  const WeightDensity w = chi.density();
  BornOppenheimerTraces out{density_from_family(w, fam), std::nullopt, family_warnings(w, fam, pnc_tol)};
  if (fam.grid.dim() == 1) {
    const CMatrix overlap = fam.states.adjoint() * fam.states;  // (i,j) = <psi_i|psi_j>
    const Eigen::Index n = fam.grid.node_count();
    CMatrix k(n, n);
    for (Eigen::Index j = 0; j < n; ++j)
      for (Eigen::Index i = 0; i < n; ++i) k(i, j) = chi.samples(i) * std::conj(chi.samples(j)) * overlap(j, i);
    out.nuclear_kernel = std::move(k);
  }
  return out;
}

}  // namespace momap
