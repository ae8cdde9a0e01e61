#pragma once

// Refinement studies: k grids (or time steps) halved in turn, one error per
// level, a least-squares slope and a pass flag against the advertised order.

#include "momap/scenario.hpp"
#include "momap/verify.hpp"

namespace momap {

struct ConvergenceRow {
  double h = 0.0;   // NaN for particle systems
  double dt = 0.0;  // 0 for static quantities
  double error = 0.0;
};

struct ConvergenceStudy {
  std::string quantity;
  std::string refined;  // "h" or "dt"
  std::vector<ConvergenceRow> rows;
  SlopeFit fit;
  double target = 2.0;
  double window = 0.3;
  bool passed = false;
  std::string detail;
};

inline std::vector<std::string> convergence_quantities(SystemKind s) {
  switch (s) {
    case SystemKind::kvn: return {"kvn_density_error", "kvn_characteristics_error"};
    case SystemKind::kvh: return {"kvh_clebsch_error"};
    case SystemKind::liouville: return {"liouville_characteristics_error"};
    case SystemKind::berry: return {"right_leg_pairing", "fd_flux"};
    case SystemKind::klimontovich: return {"weak_liouville"};
    default: return {};
  }
}

namespace detail {

/// f0 o Phi_{-t} at every node, Phi integrated with RK4 at step <= 1e-2.
inline RealField pull_back(const PhaseGrid2D& g, const PhaseFunction& h, double t,
                           const std::function<double(double, double)>& f0) {
  RealField out(g.nq(), g.np());
  const double dt = t / std::max(1.0, std::ceil(t / 1e-2));
  for (Eigen::Index j = 0; j < g.np(); ++j)
    for (Eigen::Index i = 0; i < g.nq(); ++i) {
      const PhasePoint z = t > 0.0 ? hamilton_flow(PhasePoint(g.q(i), g.p(j)), h, -t, dt, Integrator::rk4)
                                   : PhasePoint(g.q(i), g.p(j));
      out(i, j) = f0(z.q(0), z.p(0));
    }
  return out;
}

inline double relative_l2(const PhaseGrid2D& g, const RealField& a, const RealField& ref) {
  const RealField w = g.quadrature_weights();
  return std::sqrt((w * (a - ref).square()).sum() / (w * ref.square()).sum());
}

inline double phase_field_error(const Scenario& sc, const std::string& quantity, const PhaseGrid2D& g, double dt) {
  const Json& c = sc.config;
  const PhaseFunction h = build_phase_hamiltonian(c["hamiltonian"]);
  EvolveOptions opt = build_evolve_options(sc);
  opt.snapshot_every = 0;
  const double t = c["time"]["t_final"];
  const Json& init = c["initial"];
  const ClassicalWaveFunction psi0 = build_gaussian(g, init, sc.hbar());
  if (quantity == "kvn_density_error") {
    const auto a = evolve(psi0, h, t, dt, KoopmanMode::kvn, opt);
    const auto b = evolve(PhaseDensity(g, psi0.values.abs2()), h, t, dt, KoopmanMode::liouville, opt);
    return relative_l2(g, a.state.values.abs2(), b.state.values);
  }
  if (quantity == "kvh_clebsch_error") {
    const auto a = evolve(psi0, h, t, dt, KoopmanMode::kvh, opt);
    const PhaseDensity fk = clebsch_density(a.state, ClebschMode::kvh, opt.convention, opt.order);
    const auto b = evolve(clebsch_density(psi0, ClebschMode::kvh, opt.convention, opt.order), h, t, dt, KoopmanMode::liouville, opt);
    return relative_l2(g, fk.values, b.state.values);
  }
  // Characteristics oracles: the same Gaussian, normalized on this grid.
  const double q0 = init["q0"], p0 = init["p0"], sq = init["sigma_q"], sp = init["sigma_p"];
  const bool normalize = !init.contains("normalize") || init["normalize"].get<bool>();
  Json raw = init;
  raw["normalize"] = false;
  const double scale = normalize ? 1.0 / build_gaussian(g, raw, sc.hbar()).squared_norm() : 1.0;
  auto density = [&](double q, double p) {
    return scale * std::exp(-((q - q0) * (q - q0) / (sq * sq) + (p - p0) * (p - p0) / (sp * sp)));
  };
  const RealField ref = pull_back(g, h, t, density);
  if (quantity == "kvn_characteristics_error") {
    const auto a = evolve(psi0, h, t, dt, KoopmanMode::kvn, opt);
    return relative_l2(g, a.state.values.abs2(), ref);
  }
  if (quantity == "liouville_characteristics_error") {
    if (init["recipe"] != "gaussian") throw SchemaError("convergence: liouville_characteristics_error needs the gaussian recipe");
    const auto b = evolve(PhaseDensity(g, psi0.values.abs2()), h, t, dt, KoopmanMode::liouville, opt);
    return relative_l2(g, b.state.values, ref);
  }
  throw SchemaError("convergence.quantity: '" + quantity + "' is not available for this system");
}

inline double berry_error(const Scenario& sc, const std::string& quantity, Eigen::Index n) {
  const Json& c = sc.config;
  const ParameterGrid g = ParameterGrid::square(0.0, 2 * pi, n, Boundary::periodic);
  const WaveFamily fam = two_level_chern_family(g, c["hamiltonian"]["mass"].get<double>(), sc.hbar());
  if (quantity == "fd_flux") {
    const double quantum = 2 * pi * sc.hbar();
    return std::abs(total_flux(berry_curvature(fam)) - quantum) / quantum;
  }
  if (quantity == "right_leg_pairing") {
    const double width = c["pairing"]["bump_width"];
    const Cochain gamma = two_form_from_potential(g, [&](double x, double y) { return std::exp((std::cos(x) + std::cos(y) - 2.0) / width); });
    return right_leg_pairing_check(fam, WeightDensity::uniform(g), gamma).relative_error();
  }
  throw SchemaError("convergence.quantity: '" + quantity + "' is not available for this system");
}

}  // namespace detail

/// Level l uses 2^l times the scenario's nodes per axis (or 2^-l its dt).
inline ConvergenceStudy convergence_study(const Scenario& sc, int refinements) {
  if (refinements < 3) throw SchemaError("refinements: need at least 3 levels");
  if (!sc.config.contains("convergence")) throw SchemaError("convergence: system has no convergence study");
  const Json& cv = sc.config["convergence"];
  ConvergenceStudy st;
  st.quantity = cv["quantity"];
  st.target = cv["order"];
  st.window = cv["window"];
  const auto allowed = convergence_quantities(sc.system);
  if (std::find(allowed.begin(), allowed.end(), st.quantity) == allowed.end())
    throw SchemaError("convergence.quantity: '" + st.quantity + "' is not available for this system");
  const Json& c = sc.config;
  st.refined = "h";
  for (int l = 0; l < refinements; ++l) {
    const Eigen::Index f = Eigen::Index{1} << l;
    ConvergenceRow row;
    if (phase_field_system(sc.system)) {
      const Json& gj = c["grid"];
      const PhaseGrid2D g0 = build_phase_grid(gj);
      const PhaseGrid2D g(g0.q_lower(), g0.q_upper(), g0.nq() * f, g0.p_lower(), g0.p_upper(), g0.np() * f, g0.boundary());
      const HamiltonianFields hf(build_phase_hamiltonian(c["hamiltonian"]), g);
      row.h = std::max(g.hq(), g.hp());
      row.dt = cv["cfl"].get<double>() * std::min(g.hq(), g.hp()) / std::max(hf.max_speed(), 1e-300);
      row.error = detail::phase_field_error(sc, st.quantity, g, row.dt);
    } else if (sc.system == SystemKind::berry) {
      const Eigen::Index n = c["grid"]["n"].get<Eigen::Index>() * f;
      row.h = 2 * pi / static_cast<double>(n);
      row.error = detail::berry_error(sc, st.quantity, n);
    } else {
      st.refined = "dt";
      const std::string name = cv["test_function"];
      PhaseFunction phi;
      if (name == "q") phi = PhaseFunction::coordinate();
      else if (name == "p") phi = PhaseFunction::momentum();
      else if (name == "q2") phi = PhaseFunction::monomial(2, 0);
      else if (name == "qp") phi = PhaseFunction::monomial(1, 1);
      else throw SchemaError("convergence.test_function: must be q, p, q2 or qp");
      const std::string integ = c["time"]["integrator"];
      if (integ != "verlet") throw SchemaError("convergence: weak_liouville is defined for the verlet integrator");
      row.h = std::numeric_limits<double>::quiet_NaN();
      row.dt = c["time"]["dt"].get<double>() / static_cast<double>(f);
      const double t = std::max(c["time"]["t_final"].get<double>(), 4 * c["time"]["dt"].get<double>());
      row.error = weak_liouville_residual(build_ensemble(c["initial"], sc.seed()), build_phase_hamiltonian(c["hamiltonian"]), phi,
                                          t, row.dt, Integrator::verlet);
    }
    st.rows.push_back(row);
  }
  std::vector<double> x, e;
  for (const auto& r : st.rows) {
    x.push_back(st.refined == "h" ? r.h : r.dt);
    e.push_back(r.error);
  }
  st.fit = fit_slope(x, e);
  if (!st.fit.monotone) {
    st.detail = "error sequence is not monotone; no slope reported";
  } else if (std::abs(*st.fit.slope - st.target) > st.window) {
    st.detail = "slope outside target window";
  } else {
    st.passed = true;
  }
  return st;
}

/// h,dt,error
inline void write_convergence_csv(std::ostream& os, const ConvergenceStudy& st) {
  os << "h,dt,error\n";
  os.precision(17);
  for (const auto& r : st.rows) os << r.h << ',' << r.dt << ',' << r.error << '\n';
}

inline Json to_json(const ConvergenceStudy& st) {
  Json j{{"schema", "momap-convergence/1"}, {"quantity", st.quantity}, {"refined", st.refined},
         {"target_order", st.target}, {"window", st.window}, {"monotone", st.fit.monotone}, {"passed", st.passed}};
  j["slope"] = st.fit.slope ? Json(*st.fit.slope) : Json(nullptr);
  Json rows = Json::array();
  for (const auto& r : st.rows) rows.push_back({{"h", std::isnan(r.h) ? Json(nullptr) : Json(r.h)}, {"dt", r.dt}, {"error", r.error}});
  j["rows"] = rows;
  if (!st.detail.empty()) j["detail"] = st.detail;
  return j;
}

}  // namespace momap
