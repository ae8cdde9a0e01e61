#pragma once

// The verification suite: every module invariant as a CheckReport, each
// momentum-map identity paired with corrupted-J controls that must fail.

#include "momap/berry.hpp"
#include "momap/classical.hpp"
#include "momap/koopman.hpp"
#include "momap/mixtures.hpp"
#include "momap/quantum.hpp"
#include "momap/uhlmann.hpp"
#include "momap/verify.hpp"

#include <json.hpp>

namespace momap {

struct SuiteOptions {
  std::uint64_t seed = 20240917;
  /// Multiplies every residual tolerance (slope windows are unaffected).
  double tol_scale = 1.0;
  double hbar = 1.0;
};

struct SuiteReport {
  std::vector<CheckReport> checks;

  bool ok() const {
    return std::all_of(checks.begin(), checks.end(), [](const CheckReport& c) { return c.as_expected(); });
  }
  int exit_code() const { return ok() ? 0 : 1; }
  nlohmann::json to_json() const {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& c : checks) arr.push_back(momap::to_json(c));
    std::size_t controls = 0, caught = 0;
    for (const auto& c : checks)
      if (c.control) {
        ++controls;
        caught += c.passed ? 0 : 1;
      }
    return {{"schema", "momap-verify-report/1"}, {"ok", ok()}, {"controls", controls}, {"controls_failed", caught},
            {"checks", arr}};
  }
};

inline const std::vector<std::string>& suite_modules() {
  static const std::vector<std::string> names{"quantum", "mixtures", "berry", "classical", "koopman", "uhlmann"};
  return names;
}

namespace detail {

inline constexpr Eigen::Index suite_dim = 4;

inline CheckReport tagged(CheckReport r, const std::string& module) {
  r.module = module;
  return r;
}

/// -i hbar diag(|psi_k|^2) hbar-scaled: a non-covariant corruption of J.
inline CMatrix diagonal_corruption(const CVector& psi, double hbar) {
  return CMatrix((-I * hbar * psi.cwiseAbs2().cast<Complex>()).asDiagonal());
}

inline double relative_matrix_distance(const CMatrix& a, const CMatrix& b) {
  return max_abs(a - b) / std::max({max_abs(a), max_abs(b), 1e-300});
}

}  // namespace detail

// ---------------------------------------------------------------------------
// quantum_core: J(psi) = -i hbar psi psi^dagger, left action psi -> U psi

inline std::vector<CheckReport> quantum_checks(const SuiteOptions& opt) {
  constexpr Eigen::Index n = detail::suite_dim;
  const double hbar = opt.hbar;
  const double tol = 1e-11 * opt.tol_scale;
  Rng setup(derive_seed(opt.seed, 1001));
  const CMatrix xi = random_skew_hermitian(n, setup);

  auto make = [&](bool corrupt, Convention side) {
    SymplecticSample<CVector, CMatrix> s;
    s.point = [](Rng& r) { return random_unit_vector(detail::suite_dim, r); };
    s.perturbation = [n](const CVector&, Rng& r) { return random_cvector(n, r); };
    s.omega = [hbar](const CVector&, const CVector& a, const CVector& b) { return 2 * hbar * a.dot(b).imag(); };
    s.generator = [xi](const CVector& x) { return CVector(xi * x); };
    s.momentum = [hbar, corrupt](const CVector& x) {
      CMatrix j = momentum_map_pure(WaveFunction(x, hbar)).entries;
      if (corrupt) j += 1e-2 * detail::diagonal_corruption(x, hbar);
      return j;
    };
    s.pairing = [xi](const CMatrix& mu) { return dual_pairing(mu, xi); };
    s.displace = [](const CVector& x, double e, const CVector& d) { return CVector(x + e * d); };
    s.convention = side;
    return s;
  };
  ActionCheckOptions ao;
  ao.samples = 32;
  ao.fd_steps = {1e-2, 5e-3, 2.5e-3};
  ao.tol = tol;
  ao.seed = opt.seed;

  std::vector<CheckReport> out;
  out.push_back(hamiltonian_action_check("quantum.action_identity", make(false, Convention::left), ao));
  out.push_back(linear_formula_check("quantum.usual_formula", make(false, Convention::left), 32, tol, opt.seed));
  ActionCheckOptions ctl = ao;
  ctl.control = true;
  out.push_back(hamiltonian_action_check("quantum.action_identity.control_sign_flip", make(false, Convention::right), ctl));
  out.push_back(hamiltonian_action_check("quantum.action_identity.control_perturbed_J", make(true, Convention::left), ctl));

  // Equivariance J(U psi) = U J(psi) U^dagger.
  std::vector<CMatrix> group;
  for (int k = 0; k < 8; ++k) group.push_back(random_unitary(n, setup));
  auto equiv = [&](bool corrupt, const std::string& name) {
    std::function<CMatrix(const CVector&)> j = [hbar, corrupt](const CVector& x) {
      CMatrix m = momentum_map_pure(WaveFunction(x, hbar)).entries;
      if (corrupt) m += 1e-2 * detail::diagonal_corruption(x, hbar);
      return m;
    };
    return equivariance_check<CVector, CMatrix, CMatrix>(
        name, j, group, [](Rng& r) { return random_unit_vector(detail::suite_dim, r); }, 32,
        [](const CMatrix& u, const CVector& x) { return CVector(u * x); },
        [](const CMatrix& u, const CMatrix& mu) { return CMatrix(u * mu * u.adjoint()); },
        detail::relative_matrix_distance, tol, opt.seed, corrupt);
  };
  out.push_back(equiv(false, "quantum.equivariance"));
  out.push_back(equiv(true, "quantum.equivariance.control_perturbed_J"));

  // Noether: xi = -i H / hbar and the phase generator i 1 along the exact flow.
  const HermitianOperator h(random_hermitian(n, setup));
  const CVector psi0 = random_unit_vector(n, setup);
  std::vector<CVector> traj;
  for (int k = 0; k <= 20; ++k) traj.push_back(unitary_propagator(h, 0.25 * k, hbar) * psi0);
  const CMatrix xi_h = -I * h.entries / hbar;
  const CMatrix xi_phase = I * CMatrix::Identity(n, n);
  out.push_back(scalar_check("quantum.noether_commutation", commutator_norm(h.entries, xi_h), 1e-10 * opt.tol_scale));
  for (bool corrupt : {false, true}) {
    std::function<CMatrix(const CVector&)> j = [hbar, corrupt](const CVector& x) {
      CMatrix m = momentum_map_pure(WaveFunction(x, hbar)).entries;
      if (corrupt) m += 1e-2 * detail::diagonal_corruption(x, hbar);
      return m;
    };
    std::function<double(const CMatrix&)> pe = [&](const CMatrix& mu) { return dual_pairing(mu, xi_h); };
    out.push_back(noether_check<CVector, CMatrix>(corrupt ? "quantum.noether_energy.control_perturbed_J" : "quantum.noether_energy",
                                                  traj, j, pe, tol, corrupt));
  }
  std::function<CMatrix(const CVector&)> jp = [hbar](const CVector& x) { return momentum_map_pure(WaveFunction(x, hbar)).entries; };
  std::function<double(const CMatrix&)> pp = [&](const CMatrix& mu) { return dual_pairing(mu, xi_phase); };
  out.push_back(noether_check<CVector, CMatrix>("quantum.noether_phase", traj, jp, pp, tol));
  for (auto& r : out) r = detail::tagged(std::move(r), "quantum");
  return out;
}

// ---------------------------------------------------------------------------
// mixtures: J(psi(.)) = -i hbar int w psi psi^dagger, fibrewise left action

inline std::vector<CheckReport> mixture_checks(const SuiteOptions& opt) {
  constexpr Eigen::Index m = detail::suite_dim;
  const double hbar = opt.hbar;
  const double tol = 1e-11 * opt.tol_scale;
  const ParameterGrid g = ParameterGrid::line(0.0, 2 * pi, 64, Boundary::periodic);
  const WeightDensity w = WeightDensity::from_function(g, [](const Eigen::Vector3d& r) { return 1.0 + 0.5 * std::cos(r(0)); });
  Rng setup(derive_seed(opt.seed, 2001));
  const CMatrix xi = random_skew_hermitian(detail::suite_dim, setup);
  auto draw = [g, hbar](Rng& r) {
    CMatrix s(detail::suite_dim, g.node_count());
    for (Eigen::Index x = 0; x < g.node_count(); ++x) s.col(x) = random_unit_vector(detail::suite_dim, r);
    return WaveFamily(g, s, hbar);
  };

  std::vector<CheckReport> out;
  {
    const WaveFamily fam = draw(setup);
    const HermitianOperator h(random_hermitian(m, setup));
    const CMatrix u = unitary_propagator(h, 0.7, hbar);
    const CMatrix lhs = density_from_family(w, evolve_family(fam, h, 0.7)).entries;
    const CMatrix rhs = u * density_from_family(w, fam).entries * u.adjoint();
    out.push_back(scalar_check("mixtures.commuting_square", max_abs(lhs - rhs), tol));
  }
  auto make = [&](bool corrupt, Convention side) {
    SymplecticSample<WaveFamily, CMatrix> s;
    s.point = draw;
    s.perturbation = [g, hbar](const WaveFamily&, Rng& r) { return WaveFamily(g, random_cmatrix(detail::suite_dim, g.node_count(), r), hbar); };
    s.omega = [w](const WaveFamily&, const WaveFamily& a, const WaveFamily& b) { return family_symplectic_form(w, a, b); };
    s.generator = [xi](const WaveFamily& f) { return WaveFamily(f.grid, xi * f.states, f.hbar); };
    s.momentum = [w, hbar, corrupt](const WaveFamily& f) {
      CMatrix j = -I * hbar * density_from_family(w, f).entries;
      if (corrupt) j += 1e-2 * detail::diagonal_corruption(f.states.col(0), hbar);
      return j;
    };
    s.pairing = [xi](const CMatrix& mu) { return dual_pairing(mu, xi); };
    s.displace = [](const WaveFamily& f, double e, const WaveFamily& d) { return WaveFamily(f.grid, f.states + e * d.states, f.hbar); };
    s.convention = side;
    return s;
  };
  ActionCheckOptions ao;
  ao.samples = 8;
  ao.fd_steps = {1e-2, 5e-3, 2.5e-3};
  ao.tol = tol;
  ao.seed = opt.seed;
  out.push_back(hamiltonian_action_check("mixtures.action_identity", make(false, Convention::left), ao));
  ao.control = true;
  out.push_back(hamiltonian_action_check("mixtures.action_identity.control_sign_flip", make(false, Convention::right), ao));
  out.push_back(hamiltonian_action_check("mixtures.action_identity.control_perturbed_J", make(true, Convention::left), ao));
  for (auto& r : out) r = detail::tagged(std::move(r), "mixtures");
  return out;
}

// ---------------------------------------------------------------------------
// berry: flux quantization and the right leg <dA, gamma> = -1/2 Omega(xi psi, psi)

namespace detail {

inline Cochain localized_bump(const ParameterGrid& g) {
  return two_form_from_potential(g, [](double x, double y) { return std::exp((std::cos(x) + std::cos(y) - 2.0) / 0.25); });
}

}  // namespace detail

inline std::vector<CheckReport> berry_checks(const SuiteOptions& opt) {
  const double hbar = opt.hbar;
  std::vector<CheckReport> out;
  const ParameterGrid g64 = ParameterGrid::square(0.0, 2 * pi, 64, Boundary::periodic);
  const WaveFamily fam = two_level_chern_family(g64, 1.0, hbar);
  const double quantum = 2 * pi * hbar;
  out.push_back(scalar_check("berry.wilson_flux_quantized",
                             std::abs(total_flux(berry_curvature(fam, CurvatureBackend::wilson_loop)) - quantum),
                             1e-10 * opt.tol_scale));
  out.push_back(scalar_check("berry.fd_flux_within_2pct",
                             std::abs(total_flux(berry_curvature(fam)) - quantum) / quantum, 2e-2 * opt.tol_scale));

  const WeightDensity w = WeightDensity::uniform(g64);
  const Cochain gamma = detail::localized_bump(g64);
  out.push_back(scalar_check("berry.right_leg_pairing", right_leg_pairing_check(fam, w, gamma).relative_error(),
                             1e-2 * opt.tol_scale));

  // FD form of the right leg on the same family: d<B, gamma> . dpsi = -Omega(xi psi, dpsi).
  const VolVectorField xi = stream_vector_field(exact_part(gamma).first, w);
  const double area = g64.spacing(0) * g64.spacing(1);
  auto make = [&](Convention side) {
    SymplecticSample<WaveFamily, Cochain> s;
    s.point = [fam](Rng&) { return fam; };
    s.perturbation = [g64, hbar](const WaveFamily& f, Rng& r) {
      // Smooth perturbation localized near the bump.
      const CVector a = random_cvector(2, r), b = random_cvector(2, r);
      const double k0 = uniform(r, -1, 1), k1 = uniform(r, -1, 1);
      CMatrix d(2, g64.node_count());
      for (Eigen::Index x = 0; x < g64.node_count(); ++x) {
        const auto p = g64.point(x);
        const double env = std::exp((std::cos(p(0)) + std::cos(p(1)) - 2.0) / 0.5);
        CVector v = env * (a * std::cos(p(0) + k0) + b * std::sin(p(1) + k1));
        // Tangent to the unit sphere at every node.
        d.col(x) = v - f.states.col(x).dot(v).real() * f.states.col(x);
      }
      return WaveFamily(g64, d, hbar);
    };
    s.omega = [w](const WaveFamily&, const WaveFamily& a, const WaveFamily& b) { return family_symplectic_form(w, a, b); };
    s.generator = [xi](const WaveFamily& f) { return transport_generator(xi, f); };
    s.momentum = [](const WaveFamily& f) { return berry_curvature(f); };
    s.pairing = [gamma, area](const Cochain& b) {
      double acc = 0.0;
      for (Eigen::Index p = 0; p < b.grid().node_count(); ++p)
        if (b.valid(0, p)) acc += b(0, p) * gamma(0, p) / area;
      return acc;
    };
    s.displace = [](const WaveFamily& f, double e, const WaveFamily& d) { return WaveFamily(f.grid, f.states + e * d.states, f.hbar); };
    s.convention = side;
    return s;
  };
  ActionCheckOptions ao;
  ao.samples = 4;
  ao.fd_steps = {4e-2, 2e-2, 1e-2};
  ao.tol = 1e-2 * opt.tol_scale;
  ao.seed = opt.seed;
  out.push_back(hamiltonian_action_check("berry.right_leg_identity", make(Convention::right), ao));
  ao.control = true;
  out.push_back(hamiltonian_action_check("berry.right_leg_identity.control_left_sign", make(Convention::left), ao));

  // FD curvature converges at slope 2.
  std::vector<double> hs, errs;
  for (Eigen::Index n : {32, 64, 128}) {
    const ParameterGrid gn = ParameterGrid::square(0.0, 2 * pi, n, Boundary::periodic);
    hs.push_back(gn.spacing(0));
    errs.push_back(std::abs(total_flux(berry_curvature(two_level_chern_family(gn, 1.0, hbar))) - quantum) / quantum);
  }
  out.push_back(slope_check("berry.fd_flux_slope", hs, errs, 2.0, 0.3));
  for (auto& r : out) r = detail::tagged(std::move(r), "berry");
  return out;
}

// ---------------------------------------------------------------------------
// classical_core: Klimontovich left leg J(z) = sum_k w_k delta(z - z_k)

namespace detail {

/// The Klimontovich measure seen through its action on test functions.
using WeakMeasure = std::function<double(const std::function<double(const PhasePoint&)>&)>;

inline WeightedEnsemble draw_ensemble(Rng& r, std::size_t n = 16) {
  RVector w(static_cast<Eigen::Index>(n));
  std::vector<PhasePoint> pts;
  for (std::size_t k = 0; k < n; ++k) {
    w(static_cast<Eigen::Index>(k)) = uniform(r, 0.5, 1.5);
    pts.emplace_back(gaussian(r), gaussian(r));
  }
  return WeightedEnsemble(w / w.sum(), std::move(pts));
}

}  // namespace detail

inline std::vector<CheckReport> classical_checks(const SuiteOptions& opt) {
  std::vector<CheckReport> out;
  Rng setup(derive_seed(opt.seed, 4001));
  const PhaseFunction h = PhaseFunction::harmonic();

  // Weak Liouville residual, slope 2 in dt for each test function.
  const WeightedEnsemble e0 = detail::draw_ensemble(setup);
  const std::vector<std::pair<std::string, PhaseFunction>> tests{{"q", PhaseFunction::coordinate()},
                                                                  {"p", PhaseFunction::momentum()},
                                                                  {"q2", PhaseFunction::monomial(2, 0)},
                                                                  {"qp", PhaseFunction::monomial(1, 1)}};
  for (const auto& [name, phi] : tests) {
    std::vector<double> dts{0.04, 0.02, 0.01}, res;
    for (double dt : dts) res.push_back(weak_liouville_residual(e0, h, phi, 1.0, dt, Integrator::verlet));
    out.push_back(slope_check("classical.weak_liouville_slope." + name, dts, res, 2.0, 0.3));
  }

  // Left-leg equivariance under catalog maps, evaluated in weak form.
  std::vector<CanonicalMap> maps{CanonicalMap::identity(), CanonicalMap::rotation(0.9), CanonicalMap::shear(-0.6),
                                 CanonicalMap::translation(0.3, -1.1), group_compose(CanonicalMap::rotation(-0.4), CanonicalMap::translation(1.0, 0.5))};
  const std::vector<PhaseFunction> probes{PhaseFunction::coordinate(), PhaseFunction::momentum(), PhaseFunction::monomial(2, 1),
                                          PhaseFunction::pendulum(1.0), PhaseFunction::quartic(0.5)};
  auto equiv = [&](bool corrupt, const std::string& name) {
    std::function<detail::WeakMeasure(const WeightedEnsemble&)> j = [corrupt](const WeightedEnsemble& e) {
      return detail::WeakMeasure([e, corrupt](const std::function<double(const PhasePoint&)>& phi) {
        return ensemble_pairing(e, [&](const PhasePoint& z) { return (corrupt ? 1.0 + 1e-2 * z.q(0) : 1.0) * phi(z); });
      });
    };
    std::function<WeightedEnsemble(const CanonicalMap&, const WeightedEnsemble&)> push = [](const CanonicalMap& g, const WeightedEnsemble& e) {
      return push_forward(g, e);
    };
    std::function<detail::WeakMeasure(const CanonicalMap&, const detail::WeakMeasure&)> coad = [](const CanonicalMap& g, const detail::WeakMeasure& mu) {
      return detail::WeakMeasure([g, mu](const std::function<double(const PhasePoint&)>& phi) {
        return mu([&](const PhasePoint& z) { return phi(g(z)); });
      });
    };
    std::function<double(const detail::WeakMeasure&, const detail::WeakMeasure&)> dist = [&](const detail::WeakMeasure& a, const detail::WeakMeasure& b) {
      double d = 0.0;
      for (const auto& f : probes) {
        const std::function<double(const PhasePoint&)> phi = [&](const PhasePoint& z) { return f(z); };
        d = std::max(d, std::abs(a(phi) - b(phi)));
      }
      return d;
    };
    return equivariance_check<WeightedEnsemble, CanonicalMap, detail::WeakMeasure>(
        name, j, maps, [](Rng& r) { return detail::draw_ensemble(r); }, 8, push, coad, dist, 1e-12 * opt.tol_scale,
        opt.seed, corrupt);
  };
  out.push_back(equiv(false, "classical.left_leg_equivariance"));
  out.push_back(equiv(true, "classical.left_leg_equivariance.control_perturbed_J"));

  // Hamiltonian action of a collective observable F: <J, F> = sum w F(z_k), generator X_F.
  const PhaseFunction f = PhaseFunction::monomial(2, 0, 0.5) + PhaseFunction::monomial(1, 1, 0.3) + PhaseFunction::monomial(0, 2, 0.2);
  auto make = [&](bool corrupt, Convention side) {
    SymplecticSample<WeightedEnsemble, WeightedEnsemble> s;
    s.point = [](Rng& r) { return detail::draw_ensemble(r); };
    s.perturbation = [](const WeightedEnsemble& e, Rng& r) {
      std::vector<PhasePoint> d;
      for (std::size_t k = 0; k < e.size(); ++k) d.emplace_back(gaussian(r), gaussian(r));
      return WeightedEnsemble(e.weights, std::move(d));
    };
    s.omega = [](const WeightedEnsemble& x, const WeightedEnsemble& a, const WeightedEnsemble& b) {
      double acc = 0.0;
      for (std::size_t k = 0; k < x.size(); ++k)
        acc += x.weights(static_cast<Eigen::Index>(k)) *
               (a.points[k].q.dot(b.points[k].p) - a.points[k].p.dot(b.points[k].q));
      return acc;
    };
    s.generator = [f](const WeightedEnsemble& e) {
      std::vector<PhasePoint> v;
      for (const auto& z : e.points) v.emplace_back(f.grad_p(z), RVector(-f.grad_q(z)));
      return WeightedEnsemble(e.weights, std::move(v));
    };
    s.momentum = [](const WeightedEnsemble& e) { return e; };
    s.pairing = [f, corrupt](const WeightedEnsemble& e) {
      return ensemble_pairing(e, [&](const PhasePoint& z) { return (corrupt ? 1.0 + 1e-2 * z.q(0) : 1.0) * f(z); });
    };
    s.displace = [](const WeightedEnsemble& e, double eps, const WeightedEnsemble& d) {
      std::vector<PhasePoint> z;
      for (std::size_t k = 0; k < e.size(); ++k)
        z.emplace_back(RVector(e.points[k].q + eps * d.points[k].q), RVector(e.points[k].p + eps * d.points[k].p));
      return WeightedEnsemble(e.weights, std::move(z));
    };
    s.convention = side;
    return s;
  };
  ActionCheckOptions ao;
  ao.samples = 16;
  ao.fd_steps = {1e-2, 5e-3, 2.5e-3};
  ao.tol = 1e-10 * opt.tol_scale;
  ao.seed = opt.seed;
  out.push_back(hamiltonian_action_check("classical.collective_action_identity", make(false, Convention::left), ao));
  ao.control = true;
  out.push_back(hamiltonian_action_check("classical.collective_action_identity.control_sign_flip", make(false, Convention::right), ao));
  out.push_back(hamiltonian_action_check("classical.collective_action_identity.control_perturbed_J", make(true, Convention::left), ao));

  // Group law of the central extension.
  double assoc = 0.0;
  for (int k = 0; k < 20; ++k) {
    CanonicalMap a = group_compose(CanonicalMap::translation(gaussian(setup), gaussian(setup)), CanonicalMap::rotation(uniform(setup, -pi, pi)));
    CanonicalMap b = group_compose(CanonicalMap::shear(gaussian(setup)), CanonicalMap::translation(gaussian(setup), gaussian(setup)));
    CanonicalMap c = CanonicalMap::translation(gaussian(setup), gaussian(setup));
    a.kappa = uniform(setup, 0, 2 * pi);
    b.kappa = uniform(setup, 0, 2 * pi);
    const CanonicalMap l = group_compose(group_compose(a, b), c), r = group_compose(a, group_compose(b, c));
    assoc = std::max({assoc, max_abs(l.matrix - r.matrix), max_abs(l.offset - r.offset), std::abs(l.kappa - r.kappa)});
  }
  out.push_back(scalar_check("classical.cocycle_associativity", assoc, 1e-10 * opt.tol_scale));
  for (auto& r : out) r = detail::tagged(std::move(r), "classical");
  return out;
}

// ---------------------------------------------------------------------------
// koopman

inline std::vector<CheckReport> koopman_checks(const SuiteOptions& opt) {
  std::vector<CheckReport> out;
  const double hbar = opt.hbar;
  std::vector<SignCheck> report;
  bool unique = true;
  SignConvention chosen{};
  try {
    chosen = select_sign_convention(&report);
  } catch (const InputError&) {
    unique = false;
  }
  out.push_back(scalar_check("koopman.sign_convention_unique", unique && chosen == SignConvention::shipped() ? 0.0 : 1.0, 0.5,
                             false, "passing triple " + chosen.str()));
  for (const auto& r : report)
    if (r.convention == SignConvention::literal_reading())
      out.push_back(scalar_check("koopman.transport.control_literal_signs", r.transport, 0.1, true));

  auto state = [hbar](const PhaseGrid2D& g) {
    return ClassicalWaveFunction::from_function(
        g, [hbar](double q, double p) { return std::exp(-0.5 * (q * q + (p - 0.3) * (p - 0.3))) * std::exp(I * 0.4 * q / hbar); }, hbar);
  };
  {
    const PhaseGrid2D g = PhaseGrid2D::square(6.0, 64);
    const auto psi = state(g);
    out.push_back(scalar_check("koopman.kvh_normalization",
                               std::abs(clebsch_density(psi, ClebschMode::kvh).integral() - psi.squared_norm()), 1e-8 * opt.tol_scale));
    out.push_back(scalar_check("koopman.bracket_density_integral",
                               std::abs(clebsch_density(psi, ClebschMode::bracket).integral()), 1e-8 * opt.tol_scale));
    const auto hh = PhaseFunction::harmonic();
    out.push_back(scalar_check("koopman.commutator_HH", commutator_defect(hh, hh, psi), 1e-10 * opt.tol_scale));
  }
  {
    std::vector<double> hs, errs;
    for (Eigen::Index n : {32, 64, 128}) {
      const PhaseGrid2D g = PhaseGrid2D::square(6.0, n);
      hs.push_back(g.hq());
      errs.push_back(commutator_defect(PhaseFunction::monomial(2, 0), PhaseFunction::monomial(0, 2), state(g)));
    }
    out.push_back(slope_check("koopman.commutator_q2p2_slope", hs, errs, 2.0, 0.3));
  }
  {
    // Flow-action consistency for H = alpha q.
    const double alpha = 0.5;
    const PhaseGrid2D g(-6.0, 6.0, 33, -8.0, 8.0, 513);
    const auto psi0 = ClassicalWaveFunction::from_function(
        g, [hbar](double q, double p) { return std::exp(-0.5 * (q * q / 2 + (p - 0.3) * (p - 0.3))) * std::exp(I * 0.4 * q / hbar); }, hbar);
    EvolveOptions eo;
    eo.order = 4;
    const auto r = evolve(psi0, PhaseFunction::linear(alpha, 0.0), 1.0, 0.25 * g.hp() / alpha, KoopmanMode::kvh, eo);
    out.push_back(scalar_check("koopman.flow_action",
                               distance_modulo_phase(r.state, kvh_group_action(psi0, CanonicalMap::translation(0.0, alpha))),
                               1e-6 * opt.tol_scale));
    out.push_back(scalar_check("koopman.flow_action.control_forward_map",
                               distance_modulo_phase(r.state, kvh_group_action(psi0, CanonicalMap::translation(0.0, -alpha))),
                               1e-6 * opt.tol_scale, true));
  }
  for (auto& r : out) r = detail::tagged(std::move(r), "koopman");
  return out;
}

// ---------------------------------------------------------------------------
// uhlmann

inline std::vector<CheckReport> uhlmann_checks(const SuiteOptions& opt) {
  std::vector<CheckReport> out;
  const double hbar = opt.hbar;
  Rng setup(derive_seed(opt.seed, 6001));
  double trace = 0.0;
  for (int k = 0; k < 1000; ++k) {
    const Eigen::Index n = 1 + static_cast<Eigen::Index>(k % 8);
    trace = std::max(trace, std::abs(w_commutator(WOperator(random_cmatrix(n, n, setup), hbar)).trace()));
  }
  out.push_back(scalar_check("uhlmann.commutator_traceless", trace, 1e-12 * opt.tol_scale));

  constexpr Eigen::Index n = detail::suite_dim;
  const CMatrix xi = random_skew_hermitian(n, setup);
  auto draw = [hbar](Rng& r) { return WOperator(random_cmatrix(detail::suite_dim, detail::suite_dim, r) / 2.0, hbar); };
  auto base = [&](Convention side) {
    SymplecticSample<WOperator, CMatrix> s;
    s.point = draw;
    s.perturbation = [hbar](const WOperator&, Rng& r) { return WOperator(random_cmatrix(detail::suite_dim, detail::suite_dim, r), hbar); };
    s.omega = [](const WOperator&, const WOperator& a, const WOperator& b) { return w_symplectic_form(a, b); };
    s.pairing = [xi](const CMatrix& mu) { return dual_pairing(mu, xi); };
    s.displace = [](const WOperator& w, double e, const WOperator& d) { return WOperator(w.entries + e * d.entries, w.hbar); };
    s.convention = side;
    return s;
  };
  ActionCheckOptions ao;
  ao.samples = 32;
  ao.fd_steps = {1e-2, 5e-3, 2.5e-3};
  ao.tol = 1e-11 * opt.tol_scale;
  ao.seed = opt.seed;
  auto left = [&](Convention side, bool corrupt) {
    auto s = base(side);
    s.generator = [xi](const WOperator& w) { return WOperator(xi * w.entries, w.hbar); };
    s.momentum = [corrupt](const WOperator& w) {
      CMatrix j = -I * w.hbar * rho_from_w(w).entries;
      if (corrupt) j += 1e-2 * detail::diagonal_corruption(w.entries.col(0), w.hbar);
      return j;
    };
    return s;
  };
  auto adjoint = [&](Convention side, bool corrupt) {
    auto s = base(side);
    s.generator = [xi](const WOperator& w) { return WOperator(xi * w.entries - w.entries * xi, w.hbar); };
    s.momentum = [corrupt](const WOperator& w) {
      CMatrix j = adjoint_momentum_map(w).entries;
      if (corrupt) j += 1e-2 * detail::diagonal_corruption(w.entries.col(0), w.hbar);
      return j;
    };
    return s;
  };
  out.push_back(hamiltonian_action_check("uhlmann.rho_from_w_action_identity", left(Convention::left, false), ao));
  out.push_back(hamiltonian_action_check("uhlmann.adjoint_action_identity", adjoint(Convention::left, false), ao));
  ActionCheckOptions ctl = ao;
  ctl.control = true;
  out.push_back(hamiltonian_action_check("uhlmann.rho_from_w_action_identity.control_sign_flip", left(Convention::right, false), ctl));
  out.push_back(hamiltonian_action_check("uhlmann.rho_from_w_action_identity.control_perturbed_J", left(Convention::left, true), ctl));
  out.push_back(hamiltonian_action_check("uhlmann.adjoint_action_identity.control_sign_flip", adjoint(Convention::right, false), ctl));
  out.push_back(hamiltonian_action_check("uhlmann.adjoint_action_identity.control_perturbed_J", adjoint(Convention::left, true), ctl));

  // Equivariance of both maps.
  double eq_rho = 0.0, eq_adj = 0.0;
  for (int k = 0; k < 50; ++k) {
    const WOperator w = draw(setup);
    const CMatrix u = random_unitary(n, setup);
    eq_rho = std::max(eq_rho, max_abs(rho_from_w(WOperator(u * w.entries, hbar)).entries - u * rho_from_w(w).entries * u.adjoint()));
    eq_adj = std::max(eq_adj, max_abs(adjoint_momentum_map(WOperator(u * w.entries * u.adjoint(), hbar)).entries -
                                      u * adjoint_momentum_map(w).entries * u.adjoint()));
  }
  out.push_back(scalar_check("uhlmann.rho_from_w_equivariance", eq_rho, 1e-11 * opt.tol_scale));
  out.push_back(scalar_check("uhlmann.adjoint_equivariance", eq_adj, 1e-11 * opt.tol_scale));

  // Hybrid evolution commutes with assembling rho.
  double square = 0.0;
  for (int k = 0; k < 20; ++k) {
    const CMatrix u = random_unitary(n, setup);
    CMatrix nil = CMatrix::Zero(n, n);
    nil(1, 0) = 0.4;
    const HybridState s0(WaveFunction(u.col(0), hbar), WOperator(u * nil * u.adjoint(), hbar));
    const HermitianOperator h(random_hermitian(n, setup));
    const auto r = evolve_hybrid(s0, h, 0.8);
    square = std::max(square, max_abs(r.rho.entries - evolve_density(s0.density(), h, 0.8, hbar).entries));
  }
  out.push_back(scalar_check("uhlmann.hybrid_commuting_square", square, 1e-11 * opt.tol_scale));

  // Admissibility gate on the pinned non-positive instance.
  {
    CVector e1 = CVector::Zero(2);
    e1(0) = 1.0;
    CMatrix w = CMatrix::Zero(2, 2);
    w(0, 1) = 0.5;
    CMatrix x = CMatrix::Zero(2, 2);
    x(0, 1) = x(1, 0) = 1.0;
    double rejected = 1.0;
    std::string detail;
    try {
      evolve_hybrid(HybridState(WaveFunction(e1, hbar), WOperator(w, hbar)), HermitianOperator(x), pi / 4);
      detail = "non-positive instance accepted";
    } catch (const AdmissibilityError& e) {
      rejected = 0.0;
      detail = e.what();
    }
    out.push_back(scalar_check("uhlmann.admissibility_gate", rejected, 0.5, false, detail));
  }
  for (auto& r : out) r = detail::tagged(std::move(r), "uhlmann");
  return out;
}

// ---------------------------------------------------------------------------

/// module: "all" or one of suite_modules().
inline SuiteReport verify_suite(const std::string& module, const SuiteOptions& opt = {}) {
  const auto& names = suite_modules();
  if (module != "all" && std::find(names.begin(), names.end(), module) == names.end())
    throw InputError("unknown suite module '" + module + "'");
  require(opt.tol_scale > 0.0, "tolerance scale must be positive");
  SuiteReport rep;
  auto add = [&](std::vector<CheckReport> v) {
    for (auto& c : v) {
      if (c.seed == 0) c.seed = opt.seed;
      rep.checks.push_back(std::move(c));
    }
  };
  auto want = [&](const char* m) { return module == "all" || module == m; };
  if (want("quantum")) add(quantum_checks(opt));
  if (want("mixtures")) add(mixture_checks(opt));
  if (want("berry")) add(berry_checks(opt));
  if (want("classical")) add(classical_checks(opt));
  if (want("koopman")) add(koopman_checks(opt));
  if (want("uhlmann")) add(uhlmann_checks(opt));
  return rep;
}

}  // namespace momap
