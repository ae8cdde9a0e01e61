#include "momap/suite.hpp"

#include <gtest/gtest.h>

using namespace momap;

namespace {

SymplecticSample<CVector, CMatrix> pure_sample(const CMatrix& xi, Convention side, double shift = 0.0) {
  SymplecticSample<CVector, CMatrix> s;
  s.point = [](Rng& r) { return random_unit_vector(3, r); };
  s.perturbation = [](const CVector&, Rng& r) { return random_cvector(3, r); };
  s.omega = [](const CVector&, const CVector& a, const CVector& b) { return 2 * a.dot(b).imag(); };
  s.generator = [xi](const CVector& x) { return CVector(xi * x); };
  s.momentum = [shift](const CVector& x) {
    CMatrix j = momentum_map_pure(WaveFunction(x)).entries;
    j(0, 0) += -I * shift * std::norm(x(0));
    return j;
  };
  s.pairing = [xi](const CMatrix& mu) { return dual_pairing(mu, xi); };
  s.displace = [](const CVector& x, double e, const CVector& d) { return CVector(x + e * d); };
  s.convention = side;
  return s;
}

}  // namespace

TEST(FitSlope, PowerLaws) {
  const std::vector<double> h{0.1, 0.05, 0.025};
  const auto quad = fit_slope(h, {1e-2, 2.5e-3, 6.25e-4});
  ASSERT_TRUE(quad.slope);
  EXPECT_NEAR(*quad.slope, 2.0, 1e-12);
  const auto flat = fit_slope(h, {1e-3, 1e-3, 2e-3});
  EXPECT_FALSE(flat.monotone);
  EXPECT_FALSE(flat.slope);
  EXPECT_FALSE(fit_slope({0.1}, {1.0}).slope);
  EXPECT_THROW(fit_slope(h, {1.0}), InputError);
}

TEST(ActionCheck, QuantumPassesAndControlsFail) {
  Rng rng(3);
  const CMatrix xi = random_skew_hermitian(3, rng);
  ActionCheckOptions o;
  o.fd_steps = {1e-2, 5e-3, 2.5e-3};
  o.tol = 1e-10;
  const auto ok = hamiltonian_action_check("pure", pure_sample(xi, Convention::left), o);
  EXPECT_TRUE(ok.passed) << ok.value;
  EXPECT_FALSE(ok.slope);  // linear in x: FD exact to rounding
  const auto flipped = hamiltonian_action_check("flip", pure_sample(xi, Convention::right), o);
  EXPECT_FALSE(flipped.passed);
  EXPECT_NEAR(flipped.value, 2.0, 1e-6);
  const auto shifted = hamiltonian_action_check("shift", pure_sample(xi, Convention::left, 1e-2), o);
  EXPECT_FALSE(shifted.passed);
  EXPECT_GT(shifted.value, 1e-4);
}

TEST(ActionCheck, SlopeReportedAboveFloor) {
  SymplecticSample<double, double> s;
  s.point = [](Rng& r) { return uniform(r, 0.5, 1.0); };
  s.perturbation = [](const double&, Rng&) { return 1.0; };
  s.omega = [](const double&, const double& a, const double& b) { return a * b; };
  s.generator = [](const double& x) { return 3 * x * x; };  // d/dx x^3
  s.momentum = [](const double& x) { return x * x * x; };
  s.pairing = [](const double& j) { return j; };
  s.displace = [](const double& x, double e, const double& d) { return x + e * d; };
  ActionCheckOptions o;
  o.samples = 4;
  o.fd_steps = {1e-1, 5e-2, 2.5e-2};
  o.tol = 1e-2;
  const auto r = hamiltonian_action_check("cubic", s, o);
  ASSERT_TRUE(r.slope);
  EXPECT_NEAR(*r.slope, 2.0, 1e-2);
  EXPECT_TRUE(r.passed);
  o.fd_steps = {1e-1, 2e-1};
  EXPECT_THROW(hamiltonian_action_check("bad", s, o), InputError);
}

TEST(LinearFormula, SignMatters) {
  Rng rng(4);
  const CMatrix xi = random_skew_hermitian(3, rng);
  EXPECT_TRUE(linear_formula_check("l", pure_sample(xi, Convention::left), 16, 1e-12, 1).passed);
  EXPECT_FALSE(linear_formula_check("r", pure_sample(xi, Convention::right), 16, 1e-12, 1).passed);
}

TEST(Checks, ScalarNoetherSlope) {
  EXPECT_TRUE(scalar_check("a", 1e-13, 1e-12).passed);
  EXPECT_FALSE(scalar_check("nan", std::nan(""), 1.0).passed);
  const auto n = noether_check("n", std::vector<double>{1.0, 1.0 + 1e-14, 1.0 - 2e-14}, 1e-13);
  EXPECT_TRUE(n.passed);
  EXPECT_NEAR(n.value, 2e-14, 1e-16);
  const auto s = slope_check("s", {0.1, 0.05, 0.025}, {4e-3, 1e-3, 2.5e-4}, 2.0, 0.3);
  EXPECT_TRUE(s.passed);
  const auto bad = slope_check("s", {0.1, 0.05, 0.025}, {4e-3, 1e-3, 2e-3}, 2.0, 0.3);
  EXPECT_FALSE(bad.passed);
  EXPECT_FALSE(bad.detail.empty());
  CheckReport c = scalar_check("c", 1.0, 0.5, true);
  EXPECT_TRUE(c.as_expected());
  EXPECT_EQ(to_json(c)["as_expected"], true);
}

TEST(Suite, QuantumModule) {
  const SuiteReport r = verify_suite("quantum");
  for (const auto& c : r.checks) EXPECT_TRUE(c.as_expected()) << c.name << " " << c.value << " " << c.detail;
  EXPECT_EQ(r.exit_code(), 0);
}

TEST(Suite, UnknownModule) { EXPECT_THROW(verify_suite("nope"), InputError); }

TEST(Suite, TightenedTolerancesFail) {
  SuiteOptions o;
  o.tol_scale = 1e-4;
  EXPECT_EQ(verify_suite("mixtures", o).exit_code(), 1);
}
