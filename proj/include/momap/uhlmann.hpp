#pragma once

// Operator-valued Clebsch variables: rho = W W^dagger for W : C^m -> H, and
// the hybrid state rho = psi psi^dagger + [W, W^dagger].

#include "momap/quantum.hpp"

#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace momap {

struct WOperator {
  CMatrix entries;  // n x m
  double hbar = 1.0;

  WOperator() = default;
  explicit WOperator(CMatrix w, double h = 1.0) : entries(std::move(w)), hbar(h) {
    require(entries.rows() > 0 && entries.cols() > 0, "W must be non-empty");
    require(all_finite(entries), "W has non-finite entries");
    require(hbar > 0.0, "hbar must be positive");
  }
  static WOperator from_wave_function(const WaveFunction& psi) { return WOperator(psi.components, psi.hbar); }

  Eigen::Index rows() const { return entries.rows(); }
  Eigen::Index cols() const { return entries.cols(); }
  bool square() const { return rows() == cols(); }
};

inline DensityOperator rho_from_w(const WOperator& w) { return DensityOperator(w.entries * w.entries.adjoint()); }

/// 2 hbar Im Tr(W1^dagger W2).
inline double w_symplectic_form(const WOperator& a, const WOperator& b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), "w_symplectic_form: shape mismatch");
  require(a.hbar == b.hbar, "w_symplectic_form: hbar mismatch");
  return 2.0 * a.hbar * (a.entries.adjoint() * b.entries).trace().imag();
}

/// W(t) = U(t) W0.
inline WOperator evolve_w(const WOperator& w0, const HermitianOperator& h, double t) {
  require(h.dim() == w0.rows(), "evolve_w: dimension mismatch");
  return WOperator(unitary_propagator(h, t, w0.hbar) * w0.entries, w0.hbar);
}

inline CMatrix w_commutator(const WOperator& w) {
  require(w.square(), "[W, W^dagger] needs a square W");
  return w.entries * w.entries.adjoint() - w.entries.adjoint() * w.entries;
}

/// -i hbar [W, W^dagger].
inline SkewHermitianMoment adjoint_momentum_map(const WOperator& w) {
  return SkewHermitianMoment(-I * w.hbar * w_commutator(w));
}

struct HybridState {
  WaveFunction psi;
  WOperator w;

  HybridState() = default;
  HybridState(WaveFunction p, WOperator wo) : psi(std::move(p)), w(std::move(wo)) {
    require(w.square(), "hybrid state needs a square W");
    require(psi.dim() == w.rows(), "hybrid state: psi and W dimensions differ");
    require(psi.hbar == w.hbar, "hybrid state: hbar mismatch");
  }

  Eigen::Index dim() const { return psi.dim(); }
  /// psi psi^dagger + [W, W^dagger].
  DensityOperator density() const {
    return DensityOperator(psi.components * psi.components.adjoint() + w_commutator(w));
  }
  bool admissible(double tol = 1e-10) const {
    const DensityOperator rho = density();
    return rho.min_eigenvalue() >= -tol && std::abs(rho.trace - 1.0) <= tol;
  }
  /// AdmissibilityError carrying the smallest eigenvalue, or the trace if that is off.
  void require_admissible(double tol = 1e-10) const {
    const DensityOperator rho = density();
    const double lo = rho.min_eigenvalue();
    if (lo < -tol)
      throw AdmissibilityError("hybrid density is not positive: smallest eigenvalue " + std::to_string(lo), lo);
    if (std::abs(rho.trace - 1.0) > tol)
      throw AdmissibilityError("hybrid density trace " + std::to_string(rho.trace) + " differs from 1", rho.trace);
  }
};

struct HybridEvolution {
  HybridState state;
  DensityOperator rho;
};

/// psi(t) = U psi0, W(t) = U W0 U^dagger; rejects non-admissible initial data.
inline HybridEvolution evolve_hybrid(const HybridState& s0, const HermitianOperator& h, double t) {
  require(h.dim() == s0.dim(), "evolve_hybrid: dimension mismatch");
  s0.require_admissible();
  const CMatrix u = unitary_propagator(h, t, s0.psi.hbar);
  HybridState s(WaveFunction(u * s0.psi.components, s0.psi.hbar), WOperator(u * s0.w.entries * u.adjoint(), s0.w.hbar));
  DensityOperator rho = s.density();
  return {std::move(s), std::move(rho)};
}

/// row,col,re,im; one line per entry.
inline void write_matrix_csv(std::ostream& os, const CMatrix& m) {
  os << "row,col,re,im\n";
  os.precision(17);
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) os << i << ',' << j << ',' << m(i, j).real() << ',' << m(i, j).imag() << '\n';
}

inline CMatrix read_matrix_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line.rfind("row,col,re,im", 0) != 0) throw InputError("matrix csv: expected header row,col,re,im");
  struct Entry {
    long i, j;
    Complex v;
  };
  std::vector<Entry> entries;
  long rows = 0, cols = 0;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell[4];
    for (auto& c : cell)
      if (!std::getline(ss, c, ',')) throw InputError("matrix csv: expected four columns in '" + line + "'");
    try {
      const Entry e{std::stol(cell[0]), std::stol(cell[1]), Complex(std::stod(cell[2]), std::stod(cell[3]))};
      if (e.i < 0 || e.j < 0) throw InputError("matrix csv: negative index");
      rows = std::max(rows, e.i + 1);
      cols = std::max(cols, e.j + 1);
      entries.push_back(e);
    } catch (const std::logic_error&) {
      throw InputError("matrix csv: cannot parse '" + line + "'");
    }
  }
  if (entries.size() != static_cast<std::size_t>(rows * cols)) throw InputError("matrix csv: entries do not fill a dense matrix");
  CMatrix m = CMatrix::Zero(rows, cols);
  for (const auto& e : entries) m(e.i, e.j) = e.v;
  return m;
}

}  // namespace momap
