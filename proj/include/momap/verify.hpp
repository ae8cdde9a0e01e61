#pragma once

// Representation-agnostic momentum-map checks: the Hamiltonian-action identity
// by centered finite differences, equivariance, Noether conservation, and
// convergence-slope fitting. Reports serialize to JSON.

#include "momap/core.hpp"
#include "momap/random.hpp"

#include <json.hpp>

#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace momap {

/// Left actions carry <J(x), xi> = +1/2 omega(xi x, x), right actions -1/2.
enum class Convention { left, right };

inline double convention_sign(Convention c) { return c == Convention::left ? 1.0 : -1.0; }
inline std::string to_string(Convention c) { return c == Convention::left ? "left" : "right"; }

/// One point of a symplectic representation together with the data needed
/// to test d<J, xi> = sign * omega(xi(x), .). Operations on State go through
/// the callables, so any vector-like representation fits.
template <class State, class Dual>
struct SymplecticSample {
  std::function<State(Rng&)> point;
  std::function<State(const State&, Rng&)> perturbation;
  std::function<double(const State&, const State&, const State&)> omega;  // omega_x(a, b)
  std::function<State(const State&)> generator;                             // xi(x)
  std::function<Dual(const State&)> momentum;                               // J(x)
  std::function<double(const Dual&)> pairing;                               // <J, xi>
  std::function<State(const State&, double, const State&)> displace;        // x + eps dx
  Convention convention = Convention::left;
};

struct CheckReport {
  std::string name;
  std::string module;
  std::vector<double> residuals;       // per sample at the smallest step (or per group element / time)
  std::vector<double> fd_steps;
  std::vector<double> step_residuals;  // max residual per step
  std::optional<double> slope;
  double tolerance = 0.0;
  double value = 0.0;  // headline residual compared with tolerance
  bool passed = false;
  bool control = false;  // expected to fail
  std::uint64_t seed = 0;
  std::string detail;

  /// A control meets expectations when it fails; a regular check when it passes.
  bool as_expected() const { return control ? !passed : passed; }
};

inline nlohmann::json to_json(const CheckReport& r) {
  nlohmann::json j{{"name", r.name},         {"module", r.module},       {"residual", r.value},
                   {"tolerance", r.tolerance}, {"passed", r.passed},       {"control", r.control},
                   {"as_expected", r.as_expected()}, {"seed", r.seed},   {"residuals", r.residuals},
                   {"fd_steps", r.fd_steps}, {"step_residuals", r.step_residuals}};
  j["slope"] = r.slope ? nlohmann::json(*r.slope) : nlohmann::json(nullptr);
  if (!r.detail.empty()) j["detail"] = r.detail;
  return j;
}

// ---------------------------------------------------------------------------
// Slopes

struct SlopeFit {
  std::optional<double> slope;  // empty when the sequence is not monotone or too short
  bool monotone = false;
};

/// Least-squares slope of log(err) against log(h); h and err paired.
inline SlopeFit fit_slope(const std::vector<double>& h, const std::vector<double>& err) {
  require(h.size() == err.size(), "fit_slope: size mismatch");
  SlopeFit out;
  if (h.size() < 2) return out;
  out.monotone = true;
  for (std::size_t k = 1; k < h.size(); ++k) {
    const bool finer = h[k] < h[k - 1];
    if (!(err[k] > 0.0) || !(err[k - 1] > 0.0) || (finer ? err[k] >= err[k - 1] : err[k] <= err[k - 1])) out.monotone = false;
  }
  if (!out.monotone) return out;
  double mx = 0, my = 0;
  const double n = static_cast<double>(h.size());
  for (std::size_t k = 0; k < h.size(); ++k) {
    mx += std::log(h[k]) / n;
    my += std::log(err[k]) / n;
  }
  double sxy = 0, sxx = 0;
  for (std::size_t k = 0; k < h.size(); ++k) {
    const double dx = std::log(h[k]) - mx;
    sxy += dx * (std::log(err[k]) - my);
    sxx += dx * dx;
  }
  out.slope = sxy / sxx;
  return out;
}

// ---------------------------------------------------------------------------
// Hamiltonian action

struct ActionCheckOptions {
  int samples = 32;
  std::vector<double> fd_steps{1e-3, 5e-4, 2.5e-4};
  double tol = 1e-8;
  std::uint64_t seed = 20240917;
  /// Residuals below this are rounding noise and no slope is fitted.
  double slope_floor = 1e-9;
  double min_slope = 1.5;
  /// Relative residuals use max(|lhs|, |rhs|, scale_floor) as denominator.
  double scale_floor = 1e-12;
  bool control = false;
};

/// max over samples of |d/deps <J(x + eps dx), xi> - sign omega(xi(x), dx)|,
/// relative to the size of either side. The slope across steps is fitted
/// when at least three steps are given and the residuals clear slope_floor.
template <class State, class Dual>
CheckReport hamiltonian_action_check(const std::string& name, const SymplecticSample<State, Dual>& s,
                                     const ActionCheckOptions& opt = {}) {
  require(opt.samples > 0, "hamiltonian_action_check: need at least one sample");
  require(!opt.fd_steps.empty(), "hamiltonian_action_check: need at least one step");
  for (std::size_t k = 0; k < opt.fd_steps.size(); ++k) {
    require(opt.fd_steps[k] > 0.0, "fd steps must be positive");
    if (k > 0) require(opt.fd_steps[k] < opt.fd_steps[k - 1], "fd steps must be decreasing");
  }
  CheckReport rep;
  rep.name = name;
  rep.fd_steps = opt.fd_steps;
  rep.tolerance = opt.tol;
  rep.seed = opt.seed;
  rep.control = opt.control;
  const double sign = convention_sign(s.convention);
  rep.step_residuals.assign(opt.fd_steps.size(), 0.0);
  for (int k = 0; k < opt.samples; ++k) {
    Rng rng(derive_seed(opt.seed, static_cast<std::uint64_t>(k)));
    const State x = s.point(rng);
    const State dx = s.perturbation(x, rng);
    const double rhs = sign * s.omega(x, s.generator(x), dx);
    for (std::size_t e = 0; e < opt.fd_steps.size(); ++e) {
      const double eps = opt.fd_steps[e];
      const double plus = s.pairing(s.momentum(s.displace(x, eps, dx)));
      const double minus = s.pairing(s.momentum(s.displace(x, -eps, dx)));
      const double lhs = (plus - minus) / (2 * eps);
      if (!std::isfinite(lhs) || !std::isfinite(rhs))
        throw DivergenceError(name + ": non-finite evaluation in sample " + std::to_string(k), eps);
      const double r = std::abs(lhs - rhs) / std::max({std::abs(lhs), std::abs(rhs), opt.scale_floor});
      rep.step_residuals[e] = std::max(rep.step_residuals[e], r);
      if (e + 1 == opt.fd_steps.size()) rep.residuals.push_back(r);
    }
  }
  rep.value = rep.step_residuals.back();
  bool slope_ok = true;
  if (opt.fd_steps.size() >= 3) {
    const bool resolved = *std::min_element(rep.step_residuals.begin(), rep.step_residuals.end()) > opt.slope_floor;
    if (resolved) {
      const SlopeFit fit = fit_slope(opt.fd_steps, rep.step_residuals);
      rep.slope = fit.slope;
      slope_ok = fit.slope && *fit.slope >= opt.min_slope;
      if (!slope_ok) rep.detail = "convergence slope below " + std::to_string(opt.min_slope);
    } else {
      rep.detail = "residuals at rounding floor; slope not fitted";
    }
  }
  rep.passed = rep.value <= opt.tol && slope_ok;
  return rep;
}

/// <J(x), xi> = sign/2 omega(xi(x), x): the closed form for linear actions.
template <class State, class Dual>
CheckReport linear_formula_check(const std::string& name, const SymplecticSample<State, Dual>& s, int samples,
                                 double tol, std::uint64_t seed, bool control = false) {
  CheckReport rep;
  rep.name = name;
  rep.tolerance = tol;
  rep.seed = seed;
  rep.control = control;
  const double sign = convention_sign(s.convention);
  for (int k = 0; k < samples; ++k) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(k)));
    const State x = s.point(rng);
    const double lhs = s.pairing(s.momentum(x));
    const double rhs = 0.5 * sign * s.omega(x, s.generator(x), x);
    rep.residuals.push_back(std::abs(lhs - rhs) / std::max({std::abs(lhs), std::abs(rhs), 1e-12}));
  }
  rep.value = *std::max_element(rep.residuals.begin(), rep.residuals.end());
  rep.passed = rep.value <= tol;
  return rep;
}

// ---------------------------------------------------------------------------
// Equivariance and Noether

/// max over group elements and samples of dist(J(g.x), coadjoint(g, J(x))),
/// where coadjoint(g, mu) = Ad*_{g^{-1}} mu and dist is relative.
template <class State, class Group, class Dual>
CheckReport equivariance_check(const std::string& name, const std::function<Dual(const State&)>& momentum,
                               const std::vector<Group>& elements, const std::function<State(Rng&)>& draw,
                               int samples, const std::function<State(const Group&, const State&)>& push,
                               const std::function<Dual(const Group&, const Dual&)>& coadjoint,
                               const std::function<double(const Dual&, const Dual&)>& distance, double tol,
                               std::uint64_t seed, bool control = false) {
  CheckReport rep;
  rep.name = name;
  rep.tolerance = tol;
  rep.seed = seed;
  rep.control = control;
  for (int k = 0; k < samples; ++k) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(k)));
    const State x = draw(rng);
    const Dual jx = momentum(x);
    for (const auto& g : elements) rep.residuals.push_back(distance(momentum(push(g, x)), coadjoint(g, jx)));
  }
  rep.value = rep.residuals.empty() ? 0.0 : *std::max_element(rep.residuals.begin(), rep.residuals.end());
  rep.passed = rep.value <= tol;
  return rep;
}

/// max_t |s(t) - s(0)| for a conserved series.
inline CheckReport noether_check(const std::string& name, const std::vector<double>& series, double tol,
                                 bool control = false) {
  require(!series.empty(), "noether_check: empty series");
  CheckReport rep;
  rep.name = name;
  rep.tolerance = tol;
  rep.control = control;
  for (double v : series) rep.residuals.push_back(std::abs(v - series.front()));
  rep.value = *std::max_element(rep.residuals.begin(), rep.residuals.end());
  rep.passed = rep.value <= tol;
  return rep;
}

template <class State, class Dual>
CheckReport noether_check(const std::string& name, const std::vector<State>& trajectory,
                          const std::function<Dual(const State&)>& momentum, const std::function<double(const Dual&)>& pairing,
                          double tol, bool control = false) {
  std::vector<double> series;
  series.reserve(trajectory.size());
  for (const auto& x : trajectory) series.push_back(pairing(momentum(x)));
  return noether_check(name, series, tol, control);
}

/// Generic pass/fail record for invariants that are not momentum-map identities.
inline CheckReport scalar_check(const std::string& name, double value, double tol, bool control = false,
                                std::string detail = {}) {
  CheckReport rep;
  rep.name = name;
  rep.value = value;
  rep.residuals = {value};
  rep.tolerance = tol;
  rep.control = control;
  rep.passed = std::isfinite(value) && value <= tol;
  rep.detail = std::move(detail);
  return rep;
}

/// Refinement record: errors against spacings, slope within target +- width.
inline CheckReport slope_check(const std::string& name, const std::vector<double>& h, const std::vector<double>& err,
                               double target, double width, std::optional<double> finest_tol = std::nullopt) {
  CheckReport rep;
  rep.name = name;
  rep.fd_steps = h;
  rep.step_residuals = err;
  rep.residuals = err;
  rep.value = err.empty() ? 0.0 : err.back();
  rep.tolerance = finest_tol.value_or(std::numeric_limits<double>::infinity());
  const SlopeFit fit = fit_slope(h, err);
  rep.slope = fit.slope;
  const bool slope_ok = fit.slope && std::abs(*fit.slope - target) <= width;
  rep.passed = slope_ok && rep.value <= rep.tolerance;
  if (!fit.monotone) rep.detail = "error sequence is not monotone; no slope reported";
  else if (!slope_ok) rep.detail = "slope " + std::to_string(*fit.slope) + " outside " + std::to_string(target) + " +- " + std::to_string(width);
  return rep;
}

}  // namespace momap
