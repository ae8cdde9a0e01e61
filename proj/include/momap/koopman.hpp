#pragma once

// Phase-space wavefunctions: Liouvillian L_H = i hbar {H, .}, prequantum
// operator L_H - L, KvN / KvH / Liouville evolution, Clebsch densities, the
// van Hove group action and the polar-form relations.
//
// Sign conventions are a triple (bracket, potential, lagrangian):
//   {a, b}  = s_b (a_q b_p - a_p b_q),  X_H = s_b (H_p, -H_q)
//   A       = s_A (-p dq),              J = s_b [[0, 1], [-1, 0]]
//   L       = s_L X_H . A - H
// The literal reading is (+, +, +). It violates [L_q, L_p] = i hbar L_{q,p}
// (the left side is 3 i hbar), so the shipped triple is (+, +, -), under
// which L = p H_p - H; validate_sign_convention arbitrates.

#include "momap/classical.hpp"
#include "momap/diagnostics.hpp"
#include "momap/phase_field.hpp"

#include <array>
#include <optional>
#include <vector>

namespace momap {

struct SignConvention {
  int bracket = 1;
  int potential = 1;
  int lagrangian = -1;

  static SignConvention literal_reading() { return {1, 1, 1}; }
  static SignConvention shipped() { return {1, 1, -1}; }
  static std::array<SignConvention, 8> all() {
    std::array<SignConvention, 8> out{};
    int k = 0;
    for (int b : {1, -1})
      for (int a : {1, -1})
        for (int l : {1, -1}) out[static_cast<std::size_t>(k++)] = {b, a, l};
    return out;
  }
  bool operator==(const SignConvention&) const = default;
  std::string str() const {
    auto s = [](int v) { return v > 0 ? '+' : '-'; };
    return std::string("(") + s(bracket) + "," + s(potential) + "," + s(lagrangian) + ")";
  }
};

/// A = s_A (-p dq) sampled as components (A_q, A_p).
struct SymplecticPotential {
  PhaseGrid2D grid;
  RealField aq;
  RealField ap;

  SymplecticPotential(const PhaseGrid2D& g, SignConvention c = {})
      : grid(g), aq(-static_cast<double>(c.potential) * g.p_field()), ap(RealField::Zero(g.nq(), g.np())) {}

  /// Coefficient of dq ^ dp in dA.
  RealField curl(int order = 2) const { return diff_q(ap, grid, order) - diff_p(aq, grid, order); }
};

/// J = s_b [[0, 1], [-1, 0]].
inline Eigen::Matrix2d canonical_matrix(SignConvention c) {
  Eigen::Matrix2d j;
  j << 0, 1, -1, 0;
  return static_cast<double>(c.bracket) * j;
}

/// {a, b} with centered differences.
template <class A, class B>
auto poisson_bracket(const Eigen::ArrayBase<A>& a, const Eigen::ArrayBase<B>& b, const PhaseGrid2D& g,
                     SignConvention c = {}, int order = 2) {
  require(a.rows() == g.nq() && a.cols() == g.np() && b.rows() == g.nq() && b.cols() == g.np(),
          "poisson_bracket: field does not match grid");
  return (static_cast<double>(c.bracket) *
          (diff_q(a, g, order) * diff_p(b, g, order) - diff_p(a, g, order) * diff_q(b, g, order)))
      .eval();
}

/// H and its exact gradients sampled at the nodes.
struct HamiltonianFields {
  RealField value, dq, dp;

  HamiltonianFields(const PhaseFunction& h, const PhaseGrid2D& g)
      : value(g.nq(), g.np()), dq(g.nq(), g.np()), dp(g.nq(), g.np()) {
    for (Eigen::Index j = 0; j < g.np(); ++j)
      for (Eigen::Index i = 0; i < g.nq(); ++i) {
        value(i, j) = h.value(g.q(i), g.p(j));
        dq(i, j) = h.dq(g.q(i), g.p(j));
        dp(i, j) = h.dp(g.q(i), g.p(j));
      }
  }
  double max_speed() const { return (dq.square() + dp.square()).sqrt().maxCoeff(); }
};

namespace detail {

/// {H, f} with exact H gradients.
template <class Derived>
auto bracket_with_h(const HamiltonianFields& h, const Eigen::ArrayBase<Derived>& f, const PhaseGrid2D& g,
                    SignConvention c, int order) {
  return (static_cast<double>(c.bracket) * (h.dq * diff_p(f, g, order) - h.dp * diff_q(f, g, order))).eval();
}

inline RealField lagrangian(const HamiltonianFields& h, const PhaseGrid2D& g, SignConvention c) {
  return -static_cast<double>(c.lagrangian * c.bracket * c.potential) * g.p_field() * h.dp - h.value;
}

}  // namespace detail

/// L = s_L X_H . A - H.
inline RealField lagrangian_field(const PhaseFunction& h, const PhaseGrid2D& g, SignConvention c = {}) {
  return detail::lagrangian(HamiltonianFields(h, g), g, c);
}

/// L_H psi = i hbar {H, psi}.
inline ClassicalWaveFunction liouvillian_apply(const PhaseFunction& h, const ClassicalWaveFunction& psi,
                                               SignConvention c = {}, int order = 2) {
  const HamiltonianFields hf(h, psi.grid);
  return {psi.grid, I * psi.hbar * detail::bracket_with_h(hf, psi.values, psi.grid, c, order), psi.hbar};
}

/// (L_H - L) psi.
inline ClassicalWaveFunction prequantum_apply(const PhaseFunction& h, const ClassicalWaveFunction& psi,
                                              SignConvention c = {}, int order = 2) {
  const HamiltonianFields hf(h, psi.grid);
  ComplexField out = I * psi.hbar * detail::bracket_with_h(hf, psi.values, psi.grid, c, order) -
                     detail::lagrangian(hf, psi.grid, c) * psi.values;
  return {psi.grid, std::move(out), psi.hbar};
}

// ---------------------------------------------------------------------------
// Evolution

enum class KoopmanMode { kvn, kvh, liouville };

inline std::string to_string(KoopmanMode m) {
  switch (m) {
    case KoopmanMode::kvn: return "kvn";
    case KoopmanMode::kvh: return "kvh";
    case KoopmanMode::liouville: return "liouville";
  }
  return "?";
}

struct EvolveOptions {
  int order = 2;
  SignConvention convention{};
  /// Keep every k-th state (0: only initial and final).
  long snapshot_every = 0;
  double cfl_limit = 0.5;
  double leakage_warning = 1e-6;
  double leakage_abort = 1e-4;
};

template <class State>
struct EvolveResult {
  State state;
  std::vector<State> snapshots;
  std::vector<double> times;
  Diagnostics diagnostics;
};

namespace detail {

inline double cfl_number(const HamiltonianFields& h, const PhaseGrid2D& g, double dt) {
  return dt * h.max_speed() / std::min(g.hq(), g.hp());
}

template <class Field, class Rhs, class Measure, class Wrap>
auto rk4_run(const Field& f0, double t, double dt, const EvolveOptions& opt, Rhs&& rhs,
             Measure&& measure, Wrap&& wrap) {
  const auto [n, step] = step_plan(t, dt);
  using State = decltype(wrap(f0));
  EvolveResult<State> res{wrap(f0), {}, {}, {}};
  const double norm0 = measure(f0).first;
  bool warned = false;
  auto observe = [&](double time, const Field& f) {
    const auto [norm, leak] = measure(f);
    res.diagnostics.record(time, "norm", norm);
    res.diagnostics.record(time, "norm_drift", norm0 != 0.0 ? std::abs(norm - norm0) / std::abs(norm0) : 0.0);
    res.diagnostics.record(time, "boundary_leakage", leak);
    if (leak > opt.leakage_abort)
      throw DivergenceError("boundary leakage " + std::to_string(leak) + " at t=" + std::to_string(time) +
                                " exceeds the abort threshold; enlarge the phase grid",
                            opt.leakage_abort);
    if (leak > opt.leakage_warning && !warned) {
      res.diagnostics.warn("boundary leakage " + std::to_string(leak) + " exceeds " +
                           std::to_string(opt.leakage_warning) + " at t=" + std::to_string(time));
      warned = true;
    }
  };
  Field f = f0;
  observe(0.0, f);
  res.snapshots.push_back(wrap(f));
  res.times.push_back(0.0);
  for (long k = 1; k <= n; ++k) {
    const Field k1 = rhs(f);
    const Field k2 = rhs((f + 0.5 * step * k1).eval());
    const Field k3 = rhs((f + 0.5 * step * k2).eval());
    const Field k4 = rhs((f + step * k3).eval());
    f += step / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    const double time = step * static_cast<double>(k);
    const bool snap = opt.snapshot_every > 0 && k % opt.snapshot_every == 0;
    if (snap || k == n || k % 16 == 0) observe(time, f);
    if (snap && k != n) {
      res.snapshots.push_back(wrap(f));
      res.times.push_back(time);
    }
  }
  if (n > 0) {
    res.snapshots.push_back(wrap(f));
    res.times.push_back(step * static_cast<double>(n));
  }
  const auto drift = res.diagnostics.series("norm_drift");
  if (!drift.empty() && drift.back() > 1e-6)
    res.diagnostics.warn("norm drift " + std::to_string(drift.back()) + " exceeds 1e-6");
  res.state = wrap(f);
  return res;
}

inline void check_cfl(const HamiltonianFields& hf, const PhaseGrid2D& g, double t, double dt, const EvolveOptions& opt) {
  const auto [n, step] = step_plan(t, dt);
  (void)n;
  const double cfl = cfl_number(hf, g, std::abs(step));
  if (cfl > opt.cfl_limit)
    throw DivergenceError("CFL number " + std::to_string(cfl) + " exceeds " + std::to_string(opt.cfl_limit) +
                              "; reduce dt below " + std::to_string(opt.cfl_limit * std::min(g.hq(), g.hp()) / hf.max_speed()),
                          opt.cfl_limit);
}

}  // namespace detail

/// KvN (i hbar psi_t = L_H psi) or KvH (i hbar psi_t = (L_H - L) psi), RK4 in time.
inline EvolveResult<ClassicalWaveFunction> evolve(const ClassicalWaveFunction& psi0, const PhaseFunction& h, double t,
                                                  double dt, KoopmanMode mode, const EvolveOptions& opt = {}) {
  if (mode == KoopmanMode::liouville) throw InputError("liouville mode evolves a PhaseDensity, not a wave function");
  const PhaseGrid2D& g = psi0.grid;
  const HamiltonianFields hf(h, g);
  detail::check_cfl(hf, g, t, dt, opt);
  const ComplexField phase_rate = (mode == KoopmanMode::kvh)
                                      ? ComplexField((I / psi0.hbar) * detail::lagrangian(hf, g, opt.convention))
                                      : ComplexField(ComplexField::Zero(g.nq(), g.np()));
  const RealField w = g.quadrature_weights();
  const auto layer = g.boundary_layer();
  auto rhs = [&](const ComplexField& f) -> ComplexField {
    return detail::bracket_with_h(hf, f, g, opt.convention, opt.order) + phase_rate * f;
  };
  auto measure = [&](const ComplexField& f) {
    const RealField m = w * f.abs2();
    const double total = m.sum();
    return std::pair{total, total > 0 ? layer.select(m, 0.0).sum() / total : 0.0};
  };
  auto wrap = [&](const ComplexField& f) { return ClassicalWaveFunction(g, f, psi0.hbar); };
  return detail::rk4_run(psi0.values, t, dt, opt, rhs, measure, wrap);
}

/// Liouville equation f_t = {H, f}.
inline EvolveResult<PhaseDensity> evolve(const PhaseDensity& f0, const PhaseFunction& h, double t, double dt,
                                         KoopmanMode mode = KoopmanMode::liouville, const EvolveOptions& opt = {}) {
  if (mode != KoopmanMode::liouville) throw InputError("kvn and kvh modes evolve a wave function");
  const PhaseGrid2D& g = f0.grid;
  const HamiltonianFields hf(h, g);
  detail::check_cfl(hf, g, t, dt, opt);
  const RealField w = g.quadrature_weights();
  const auto layer = g.boundary_layer();
  auto rhs = [&](const RealField& f) -> RealField { return detail::bracket_with_h(hf, f, g, opt.convention, opt.order); };
  auto measure = [&](const RealField& f) {
    const RealField m = w * f.abs();
    const double total = m.sum();
    return std::pair{(w * f).sum(), total > 0 ? layer.select(m, 0.0).sum() / total : 0.0};
  };
  auto wrap = [&](const RealField& f) { return PhaseDensity(g, f); };
  return detail::rk4_run(f0.values, t, dt, opt, rhs, measure, wrap);
}

// ---------------------------------------------------------------------------
// Clebsch densities

enum class ClebschMode { bracket, modulus, kvh };

/// bracket: i hbar {psi, psi*}; modulus: |psi|^2;
/// kvh: |psi|^2 + div(|psi|^2 J A) + i hbar {psi, psi*}.
/// `residue` receives max |Im| of the complex expression before it is dropped.
inline PhaseDensity clebsch_density(const ClassicalWaveFunction& psi, ClebschMode mode, SignConvention c = {},
                                    int order = 2, double* residue = nullptr) {
  const PhaseGrid2D& g = psi.grid;
  const RealField d = psi.values.abs2();
  if (mode == ClebschMode::modulus) {
    if (residue) *residue = 0.0;
    return {g, d};
  }
  const ComplexField conj = psi.values.conjugate();
  const ComplexField br = I * psi.hbar * poisson_bracket(psi.values, conj, g, c, order);
  if (residue) *residue = br.imag().abs().maxCoeff();
  if (mode == ClebschMode::bracket) return {g, br.real()};
  // J A = s_b s_A (0, p), so div(D J A) = s_b s_A d/dp (p D).
  const RealField div = static_cast<double>(c.bracket * c.potential) * diff_p((g.p_field() * d).eval(), g, order);
  return {g, d + div + br.real()};
}

// ---------------------------------------------------------------------------
// Prequantum homomorphism

/// ||L_H L_K psi - L_K L_H psi - i hbar L_{H,K} psi|| / ||psi||, norms over
/// nodes at least `margin` cells from open edges.
inline double commutator_defect(const PhaseFunction& h, const PhaseFunction& k, const ClassicalWaveFunction& psi,
                                SignConvention c = {}, int order = 2, Eigen::Index margin = 4) {
  const PhaseFunction hk = static_cast<double>(c.bracket) * poisson_bracket(h, k);
  const auto lh = [&](const ClassicalWaveFunction& f) { return prequantum_apply(h, f, c, order); };
  const auto lk = [&](const ClassicalWaveFunction& f) { return prequantum_apply(k, f, c, order); };
  const ComplexField lhs = lh(lk(psi)).values - lk(lh(psi)).values;
  const ComplexField rhs = I * psi.hbar * prequantum_apply(hk, psi, c, order).values;
  const RealField w = psi.grid.quadrature_weights() * (!psi.grid.boundary_layer(margin)).cast<double>();
  const double num = std::sqrt((w * (lhs - rhs).abs2()).sum());
  const double den = std::sqrt(psi.squared_norm());
  return den > 0.0 ? num / den : 0.0;
}

// ---------------------------------------------------------------------------
// Group action

/// psi -> exp(i/hbar [kappa + int_0^z (eta^* A - A)]) psi(eta(z)), with psi(eta(z))
/// interpolated by cubic Lagrange stencils.
inline ClassicalWaveFunction kvh_group_action(const ClassicalWaveFunction& psi, const CanonicalMap& g,
                                              SignConvention c = {}) {
  require(g.dof() == 1, "kvh_group_action acts on one degree of freedom");
  const PhaseGrid2D& grid = psi.grid;
  // Mass that the map would carry out of the box: source nodes y with eta^{-1}(y) outside.
  const CanonicalMap inv = g.inverse();
  const RealField w = grid.quadrature_weights() * psi.values.abs2();
  double lost = 0.0;
  auto outside = [&](const PhasePoint& z) {
    const double q = z.q(0), p = z.p(0);
    const bool out_p = p < grid.p_lower() - 1e-12 || p > grid.p_upper() + 1e-12;
    const bool out_q = !grid.periodic_q() && (q < grid.q_lower() - 1e-12 || q > grid.q_upper() + 1e-12);
    return out_p || out_q;
  };
  for (Eigen::Index j = 0; j < grid.np(); ++j)
    for (Eigen::Index i = 0; i < grid.nq(); ++i)
      if (outside(inv(PhasePoint(grid.q(i), grid.p(j))))) lost += w(i, j);
  if (lost > 1e-8 * std::max(w.sum(), 1e-300))
    throw InputError("kvh_group_action: map carries " + std::to_string(lost / w.sum()) + " of the mass outside the grid");

  ComplexField out(grid.nq(), grid.np());
  for (Eigen::Index j = 0; j < grid.np(); ++j)
    for (Eigen::Index i = 0; i < grid.nq(); ++i) {
      const PhasePoint z(grid.q(i), grid.p(j));
      const PhasePoint ez = g(z);
      const double phase = g.kappa + static_cast<double>(c.potential) * cocycle_integral(g, z);
      out(i, j) = std::exp(I * phase / psi.hbar) * interpolate(psi.values, grid, ez.q(0), ez.p(0));
    }
  return {grid, std::move(out), psi.hbar};
}

/// Relative L2 distance between a and b after removing the best global phase.
inline double distance_modulo_phase(const ClassicalWaveFunction& a, const ClassicalWaveFunction& b) {
  require_same_phase_grid(a.grid, b.grid, "distance_modulo_phase");
  const RealField w = a.grid.quadrature_weights();
  const Complex overlap = (w * (a.values.conjugate() * b.values)).sum();
  const Complex phase = std::abs(overlap) > 0 ? overlap / std::abs(overlap) : Complex(1.0);
  const double num = std::sqrt((w * (phase * a.values - b.values).abs2()).sum());
  return num / std::sqrt(b.squared_norm());
}

// ---------------------------------------------------------------------------
// Polar form

struct PolarResiduals {
  double res_s = 0.0;
  double res_d = 0.0;
  Eigen::Index masked_nodes = 0;
};

/// Residuals of S_t = {H, S} + L and D_t = {H, D} along a trajectory sampled
/// every dt, with psi = sqrt(D) e^{iS/hbar}. Gradients of S come from
/// hbar Im(psi* grad psi) / |psi|^2; S itself is unwrapped along time per node.
inline PolarResiduals polar_residuals(const std::vector<ClassicalWaveFunction>& traj, const PhaseFunction& h, double dt,
                                      SignConvention c = {}, int order = 2, double threshold = 1e-3) {
  if (traj.size() < 3) throw InputError("polar_residuals needs at least three snapshots");
  require(dt > 0.0, "polar_residuals: dt must be positive");
  const PhaseGrid2D& g = traj.front().grid;
  for (const auto& s : traj) require_same_phase_grid(g, s.grid, "polar_residuals");
  const double hbar = traj.front().hbar;
  const HamiltonianFields hf(h, g);
  const RealField lag = detail::lagrangian(hf, g, c);

  double peak = 0.0;
  for (const auto& s : traj) peak = std::max(peak, s.values.abs().maxCoeff());
  Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> mask = !g.boundary_layer(2);
  for (const auto& s : traj) mask = mask && (s.values.abs() > threshold * peak);
  PolarResiduals out;
  out.masked_nodes = mask.count();
  if (out.masked_nodes == 0) throw InputError("polar_residuals: evaluation mask is empty");

  // Unwrapped phase per node along time.
  std::vector<RealField> phase(traj.size());
  phase[0] = hbar * traj[0].values.arg();
  for (std::size_t k = 1; k < traj.size(); ++k) {
    const RealField raw = hbar * traj[k].values.arg();
    const RealField jump = ((phase[k - 1] - raw) / (2 * pi * hbar)).round();
    phase[k] = raw + 2 * pi * hbar * jump;
  }

  for (std::size_t k = 1; k + 1 < traj.size(); ++k) {
    const ComplexField& psi = traj[k].values;
    const RealField d = psi.abs2();
    const RealField safe = mask.select(d, 1.0);
    const RealField sq = hbar * (psi.conjugate() * diff_q(psi, g, order)).imag() / safe;
    const RealField sp = hbar * (psi.conjugate() * diff_p(psi, g, order)).imag() / safe;
    const RealField hs = static_cast<double>(c.bracket) * (hf.dq * sp - hf.dp * sq);
    const RealField st = (phase[k + 1] - phase[k - 1]) / (2 * dt);
    const RealField dt_d = (traj[k + 1].values.abs2() - traj[k - 1].values.abs2()) / (2 * dt);
    const RealField hd = detail::bracket_with_h(hf, d, g, c, order);
    out.res_s = std::max(out.res_s, mask.select((st - hs - lag).abs(), 0.0).maxCoeff());
    out.res_d = std::max(out.res_d, mask.select((dt_d - hd).abs(), 0.0).maxCoeff());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Sign-convention arbitration

struct SignCheck {
  SignConvention convention;
  double commutator = 0.0;  // relative defect of [L_q, L_p] = i hbar L_{q,p}
  double transport = 0.0;   // relative L2 error of the KvH Clebsch density against characteristics
  bool passed = false;
};

/// Reference scenario: Gaussian with a nontrivial phase under the harmonic
/// flow; the Liouville reference follows Hamilton's equations, independent of
/// the bracket orientation under test.
inline SignCheck validate_sign_convention(SignConvention c) {
  SignCheck out{c};
  const PhaseGrid2D g = PhaseGrid2D::square(6.0, 48);
  const auto psi0 = ClassicalWaveFunction::from_function(g, [](double q, double p) {
    return std::exp(-0.5 * ((q - 1.0) * (q - 1.0) + (p - 0.5) * (p - 0.5))) * std::exp(I * (0.5 * q * p + 0.3 * q));
  });
  out.commutator = commutator_defect(PhaseFunction::coordinate(), PhaseFunction::momentum(), psi0, c) / psi0.hbar;

  const PhaseFunction h = PhaseFunction::harmonic();
  const double t = 0.5;
  EvolveOptions opt;
  opt.convention = c;
  const double dt = 0.4 * std::min(g.hq(), g.hp()) / HamiltonianFields(h, g).max_speed();
  const auto run = evolve(psi0, h, t, dt, KoopmanMode::kvh, opt);
  const PhaseDensity f0 = clebsch_density(psi0, ClebschMode::kvh, c);
  const PhaseDensity ft = clebsch_density(run.state, ClebschMode::kvh, c);
  RealField ref(g.nq(), g.np());
  for (Eigen::Index j = 0; j < g.np(); ++j)
    for (Eigen::Index i = 0; i < g.nq(); ++i) {
      const PhasePoint back = hamilton_flow(PhasePoint(g.q(i), g.p(j)), h, -t, 0.01, Integrator::rk4);
      ref(i, j) = interpolate(f0.values, g, back.q(0), back.p(0));
    }
  const PhaseDensity reference(g, ref);
  out.transport = PhaseDensity(g, ft.values - ref).l2_norm() / reference.l2_norm();
  out.passed = out.commutator < 0.1 && out.transport < 0.1;
  return out;
}

/// The unique triple passing validate_sign_convention; InputError if none or several pass.
inline SignConvention select_sign_convention(std::vector<SignCheck>* report = nullptr) {
  std::vector<SignConvention> passing;
  for (const auto& c : SignConvention::all()) {
    const SignCheck r = validate_sign_convention(c);
    if (report) report->push_back(r);
    if (r.passed) passing.push_back(c);
  }
  if (passing.size() != 1)
    throw InputError("sign convention arbitration found " + std::to_string(passing.size()) + " passing triples");
  return passing.front();
}

}  // namespace momap
