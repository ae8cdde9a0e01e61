#include "momap/classical.hpp"
#include "momap/random.hpp"

#include <gtest/gtest.h>

#include <sstream>

using namespace momap;

namespace {

WeightedEnsemble random_ensemble(std::size_t n, Rng& rng, Eigen::Index d = 1) {
  RVector w(static_cast<Eigen::Index>(n));
  std::vector<PhasePoint> pts;
  for (std::size_t k = 0; k < n; ++k) {
    w(static_cast<Eigen::Index>(k)) = uniform(rng, 0.5, 1.5);
    RVector q(d), p(d);
    for (Eigen::Index a = 0; a < d; ++a) {
      q(a) = gaussian(rng);
      p(a) = gaussian(rng);
    }
    pts.emplace_back(q, p);
  }
  return WeightedEnsemble(w / w.sum(), std::move(pts));
}

CanonicalMap random_catalog_map(Rng& rng) {
  const int kind = static_cast<int>(uniform(rng, 0.0, 4.0));
  CanonicalMap base = CanonicalMap::identity();
  switch (kind) {
    case 0: base = CanonicalMap::rotation(uniform(rng, -pi, pi)); break;
    case 1: base = CanonicalMap::shear(gaussian(rng)); break;
    case 2: {
      RMatrix m(2, 2);
      const double a = uniform(rng, 0.5, 2.0), b = gaussian(rng), c = gaussian(rng);
      m << a, b, c, (1.0 + b * c) / a;
      base = CanonicalMap::linear_symplectic(m);
      break;
    }
    default: base = CanonicalMap::identity();
  }
  CanonicalMap g = group_compose(CanonicalMap::translation(gaussian(rng), gaussian(rng)), base);
  g.kappa = uniform(rng, 0.0, 2 * pi);
  return g;
}

}  // namespace

TEST(PhaseFunction, CatalogValuesAndGradients) {
  const PhasePoint z(0.4, -1.2);
  EXPECT_DOUBLE_EQ(PhaseFunction::harmonic()(z), 0.5 * (0.16 + 1.44));
  EXPECT_DOUBLE_EQ(PhaseFunction::free_particle()(z), 0.72);
  EXPECT_NEAR(PhaseFunction::pendulum(2.0)(z), 0.72 - 2.0 * std::cos(0.4), 1e-15);
  EXPECT_NEAR(PhaseFunction::quartic(3.0)(z), 0.72 + 0.75 * std::pow(0.4, 4), 1e-15);
  EXPECT_DOUBLE_EQ(PhaseFunction::linear(2.0, 3.0)(z), 0.8 - 3.6);
  EXPECT_NEAR(PhaseFunction::pendulum(2.0).grad_q(z)(0), 2.0 * std::sin(0.4), 1e-15);
  EXPECT_NEAR(PhaseFunction::quartic(3.0).grad_q(z)(0), 3.0 * std::pow(0.4, 3), 1e-15);
  EXPECT_TRUE(PhaseFunction::pendulum().separable());
  EXPECT_FALSE(PhaseFunction::monomial(1, 1).separable());
}

TEST(PhaseFunction, AdditiveOverDegreesOfFreedom) {
  const PhasePoint z(RVector::LinSpaced(3, 0.1, 0.3), RVector::LinSpaced(3, -1.0, 1.0));
  const auto h = PhaseFunction::harmonic();
  EXPECT_NEAR(h(z), 0.5 * (z.q.squaredNorm() + z.p.squaredNorm()), 1e-15);
  EXPECT_DOUBLE_EQ(h.on_dof(2)(z), 0.5 * (0.09 + 1.0));
  EXPECT_EQ(h.on_dof(1).grad_q(z)(0), 0.0);
  EXPECT_THROW(h.on_dof(5)(z), InputError);
}

TEST(PhaseFunction, ClosedFormBracket) {
  const auto q2 = PhaseFunction::monomial(2, 0), p2 = PhaseFunction::monomial(0, 2);
  const auto b = poisson_bracket(q2, p2);
  Rng rng(31);
  for (int s = 0; s < 10; ++s) {
    const PhasePoint z(gaussian(rng), gaussian(rng));
    EXPECT_NEAR(b(z), 4 * z.q(0) * z.p(0), 1e-13);
    EXPECT_NEAR(b(z), poisson_bracket_at(q2, p2, z), 1e-13);
  }
  EXPECT_NEAR(poisson_bracket(PhaseFunction::coordinate(), PhaseFunction::momentum())(PhasePoint(3.0, 4.0)), 1.0, 0.0);
  const auto h = PhaseFunction::harmonic();
  EXPECT_EQ(max_abs(poisson_bracket(h, h).coefficients()), 0.0);
  EXPECT_THROW(poisson_bracket(PhaseFunction::pendulum(), h), InputError);
}

TEST(HamiltonFlow, HarmonicQuarterPeriod) {
  const auto h = PhaseFunction::harmonic();
  std::vector<double> hs, errs;
  for (double dt : {0.01, 0.005, 0.0025}) {
    const PhasePoint z = hamilton_flow(PhasePoint(1.0, 0.0), h, pi / 2, dt, Integrator::verlet);
    hs.push_back(dt);
    errs.push_back(std::hypot(z.q(0), z.p(0) + 1.0));
    EXPECT_LT(errs.back(), dt * dt);
  }
  EXPECT_NEAR(log_log_slope(hs, errs), 2.0, 0.1);
  for (auto integ : {Integrator::midpoint, Integrator::rk4}) {
    const PhasePoint z = hamilton_flow(PhasePoint(1.0, 0.0), h, pi / 2, 1e-3, integ);
    EXPECT_NEAR(z.q(0), 0.0, 1e-6);
    EXPECT_NEAR(z.p(0), -1.0, 1e-6);
  }
}

TEST(HamiltonFlow, ZeroHamiltonianIsIdentity) {
  const PhasePoint z0(RVector::Constant(2, 0.7), RVector::Constant(2, -0.2));
  for (auto integ : {Integrator::verlet, Integrator::midpoint, Integrator::rk4}) {
    const PhasePoint z = hamilton_flow(z0, PhaseFunction::constant(0.0), 3.0, 0.1, integ);
    EXPECT_EQ(z.q, z0.q);
    EXPECT_EQ(z.p, z0.p);
  }
}

TEST(HamiltonFlow, PendulumMidpointEnergyDrift) {
  const auto h = PhaseFunction::pendulum();
  const PhasePoint z0(1.0, 0.5);
  const PhasePoint mid = hamilton_flow(z0, h, 10.0, 1e-3, Integrator::midpoint);
  EXPECT_LE(std::abs(h(mid) - h(z0)) / std::abs(h(z0)), 1e-6);
  const PhasePoint ref = hamilton_flow(z0, h, 10.0, 1e-5, Integrator::rk4);
  EXPECT_LE(std::abs(h(ref) - h(z0)) / std::abs(h(z0)), 1e-12);
  EXPECT_LT((mid.stacked() - ref.stacked()).norm(), 1e-4);
}

TEST(HamiltonFlow, VerletRejectsNonSeparable) {
  EXPECT_THROW(hamilton_flow(PhasePoint(0.0, 0.0), PhaseFunction::monomial(1, 1), 1.0, 0.1), InputError);
  EXPECT_NO_THROW(hamilton_flow(PhasePoint(0.1, 0.2), PhaseFunction::monomial(1, 1), 1.0, 0.1, Integrator::midpoint));
  EXPECT_THROW(hamilton_flow(PhasePoint(0.0, 0.0), PhaseFunction::harmonic(), 1.0, 0.0), InputError);
}

TEST(HamiltonFlow, VerletEnergyBoundedOverMillionSteps) {
  const auto h = PhaseFunction::harmonic();
  const double dt = 0.05;
  PhasePoint z(1.0, 0.0);
  const double e0 = h(z);
  double worst = 0.0, late = 0.0;
  for (long k = 0; k < 1'000'000; ++k) {
    z = hamilton_step(z, h, dt, Integrator::verlet);
    const double dev = std::abs(h(z) - e0);
    worst = std::max(worst, dev);
    if (k >= 900'000) late = std::max(late, dev);
  }
  EXPECT_LE(worst, dt * dt);
  EXPECT_GE(late, 0.5 * worst);  // oscillation, no secular trend
}

TEST(HamiltonFlow, WeightsAndFamiliesCarried) {
  Rng rng(32);
  const auto e = random_ensemble(8, rng, 2);
  const auto out = hamilton_flow(e, PhaseFunction::harmonic(), 0.7, 0.01);
  EXPECT_EQ(out.weights, e.weights);
  EXPECT_EQ(out.size(), e.size());
}

TEST(EnsemblePairing, Examples) {
  Rng rng(33);
  const auto e = random_ensemble(5, rng);
  EXPECT_NEAR(ensemble_pairing(e, PhaseFunction::constant(1.0)), e.weight_sum(), 1e-15);
  const WeightedEnsemble single(RVector::Ones(1), {PhasePoint(0.3, 2.0)});
  EXPECT_DOUBLE_EQ(ensemble_pairing(single, PhaseFunction::harmonic()), 0.5 * (0.09 + 4.0));
  const WeightedEnsemble two(RVector::Constant(2, 0.5), {PhasePoint(1.0, 0.0), PhasePoint(-1.0, 0.0)});
  EXPECT_DOUBLE_EQ(ensemble_pairing(two, PhaseFunction::monomial(2, 0)), 1.0);
  EXPECT_THROW(WeightedEnsemble(RVector::Constant(1, -1.0), {PhasePoint(0, 0)}), InputError);
  EXPECT_FALSE(WeightedEnsemble(RVector::Constant(1, 2.0), {PhasePoint(0, 0)}).admissible());
}

TEST(EnsemblePairing, LeftLegEquivariance) {
  Rng rng(34);
  const auto e = random_ensemble(16, rng);
  const auto phi = PhaseFunction::quartic(0.3) + PhaseFunction::monomial(1, 1);
  for (int s = 0; s < 8; ++s) {
    const CanonicalMap eta = random_catalog_map(rng);
    const double lhs = ensemble_pairing(push_forward(eta, e), phi);
    const double rhs = ensemble_pairing(e, [&](const PhasePoint& z) { return phi(eta(z)); });
    EXPECT_NEAR(lhs, rhs, 1e-12 * std::max(1.0, std::abs(lhs)));
  }
}

TEST(WeakLiouville, TrivialTestFunctions) {
  Rng rng(35);
  const auto e = random_ensemble(16, rng);
  const auto h = PhaseFunction::harmonic();
  EXPECT_EQ(weak_liouville_residual(e, h, PhaseFunction::constant(1.0), 0.5, 0.01), 0.0);
  EXPECT_LE(weak_liouville_residual(e, h, h, 0.5, 0.01, Integrator::midpoint), 1e-8);
}

TEST(WeakLiouville, SecondOrderInDt) {
  const auto h = PhaseFunction::harmonic();
  const WeightedEnsemble single(RVector::Ones(1), {PhasePoint(1.0, 0.3)});
  for (const auto& phi : {PhaseFunction::coordinate(), PhaseFunction::momentum(), PhaseFunction::monomial(1, 1)}) {
    std::vector<double> dts, res;
    for (double dt : {0.04, 0.02, 0.01}) {
      dts.push_back(dt);
      res.push_back(weak_liouville_residual(single, h, phi, 1.0, dt));
    }
    EXPECT_NEAR(log_log_slope(dts, res), 2.0, 0.3) << phi.name();
  }
}

TEST(WeakLiouville, PendulumRk4FourthOrder) {
  const WeightedEnsemble single(RVector::Ones(1), {PhasePoint(0.8, 0.1)});
  std::vector<double> dts, res;
  for (double dt : {0.08, 0.04, 0.02}) {
    dts.push_back(dt);
    res.push_back(weak_liouville_residual(single, PhaseFunction::pendulum(), PhaseFunction::momentum(), 1.0, dt,
                                          Integrator::rk4));
  }
  // centered difference limits the observed order to 2
  EXPECT_NEAR(log_log_slope(dts, res), 2.0, 0.3);
}

TEST(ParamRightLeg, Examples) {
  const auto g = ParameterGrid::square(0.0, 1.0, 9, Boundary::open);
  const auto w = WeightDensity::uniform(g);
  const auto constant = ParamPointFamily::from_function(w, 1, [](const Eigen::Vector3d&) { return PhasePoint(0.3, 0.4); });
  EXPECT_EQ(param_right_leg(constant).max_abs(), 0.0);

  const auto chart = ParamPointFamily::from_function(w, 1, [](const Eigen::Vector3d& r) { return PhasePoint(r(0), r(1)); });
  const Cochain b = param_right_leg(chart);
  const double area = g.spacing(0) * g.spacing(1);
  for (Eigen::Index x = 0; x < g.node_count(); ++x)
    if (b.valid(0, x)) {
      EXPECT_NEAR(b(0, x), area, 1e-15);
    }

  EXPECT_THROW(param_right_leg(ParamPointFamily(WeightDensity::uniform(ParameterGrid::line(0, 1, 5, Boundary::open)),
                                                RMatrix::Zero(1, 5), RMatrix::Zero(1, 5))),
               InputError);
}

TEST(ParamRightLeg, NonlinearJacobianOracle) {
  std::vector<double> hs, errs;
  for (int n : {16, 32, 64}) {
    const auto g = ParameterGrid::square(0.2, 1.2, n, Boundary::open);
    const auto fam = ParamPointFamily::from_function(WeightDensity::uniform(g), 1, [](const Eigen::Vector3d& r) {
      return PhasePoint(r(0) * r(0) + 0.3 * std::sin(r(1)), r(1) + 0.2 * r(0) * r(1));
    });
    const Cochain b = param_right_leg(fam);
    double e = 0.0;
    for (Eigen::Index x = 0; x < g.node_count(); ++x) {
      if (!b.valid(0, x)) continue;
      const double r0 = g.coordinate(x, 0) + 0.5 * g.spacing(0), r1 = g.coordinate(x, 1) + 0.5 * g.spacing(1);
      // det of d(q,p)/d(r0,r1) at the plaquette centre
      const double jac = 2 * r0 * (1 + 0.2 * r0) - 0.3 * std::cos(r1) * 0.2 * r1;
      e = std::max(e, std::abs(b(0, x) / (g.spacing(0) * g.spacing(1)) - jac));
    }
    hs.push_back(g.spacing(0));
    errs.push_back(e);
  }
  EXPECT_NEAR(log_log_slope(hs, errs), 2.0, 0.3);
}

TEST(ParamRightLeg, EquivariantUnderGridShift) {
  Rng rng(36);
  const auto g = ParameterGrid::square(0.0, 1.0, 12, Boundary::periodic);
  const RMatrix q = RMatrix::Random(2, g.node_count()), p = RMatrix::Random(2, g.node_count());
  const ParamPointFamily fam(WeightDensity::uniform(g), q, p);
  const std::array<Eigen::Index, 3> off{3, 7, 0};
  RMatrix q2(2, g.node_count()), p2(2, g.node_count());
  for (Eigen::Index x = 0; x < g.node_count(); ++x) {
    const Eigen::Index y = *g.shift(*g.shift(x, 0, off[0]), 1, off[1]);
    q2.col(x) = q.col(y);
    p2.col(x) = p.col(y);
  }
  const ParamPointFamily moved(WeightDensity::uniform(g), q2, p2);
  EXPECT_LE((param_right_leg(moved) - param_right_leg(fam).shifted(off)).max_abs(), 1e-15);
}

TEST(CanonicalMap, CatalogIsSymplectic) {
  Rng rng(37);
  for (int s = 0; s < 20; ++s) {
    const CanonicalMap m = random_catalog_map(rng);
    const RMatrix j = canonical_matrix(1);
    EXPECT_LE(max_abs(m.matrix.transpose() * j * m.matrix - j), 1e-10);
  }
  RMatrix bad = RMatrix::Identity(2, 2);
  bad(0, 0) = 2.0;
  EXPECT_THROW(CanonicalMap::linear_symplectic(bad), InputError);
  EXPECT_LE(max_abs(CanonicalMap::rotation(0.3, 3).matrix.transpose() * canonical_matrix(3) *
                        CanonicalMap::rotation(0.3, 3).matrix -
                    canonical_matrix(3)),
            1e-14);
}

TEST(Cocycle, Examples) {
  EXPECT_EQ(cocycle_integral(CanonicalMap::identity(), PhasePoint(1.3, -0.4)), 0.0);
  EXPECT_NEAR(cocycle_integral(CanonicalMap::translation(0.7, -1.9), PhasePoint(2.5, 3.0)), 1.9 * 2.5, 1e-13);
  Rng rng(38);
  for (int s = 0; s < 10; ++s) {
    const CanonicalMap rot = CanonicalMap::rotation(uniform(rng, -pi, pi));
    EXPECT_LE(cocycle_path_defect(rot, PhasePoint(gaussian(rng), gaussian(rng))), 1e-8);
  }
}

TEST(GroupCompose, IdentityAndTranslations) {
  const CanonicalMap g1 = CanonicalMap::translation(0.4, 1.1);
  const CanonicalMap c = group_compose(g1, CanonicalMap::identity());
  EXPECT_EQ(c.offset, g1.offset);
  EXPECT_EQ(c.kappa, g1.kappa);

  CanonicalMap a = CanonicalMap::translation(0.5, -0.3), b = CanonicalMap::translation(-1.2, 2.0);
  a.kappa = 0.1;
  b.kappa = 0.2;
  const CanonicalMap ab = group_compose(a, b);
  EXPECT_EQ(ab.kind, CanonicalMap::Kind::translation);
  EXPECT_NEAR(ab.offset(0), -0.7, 1e-15);
  EXPECT_NEAR(ab.offset(1), 1.7, 1e-15);
  // int_0^{(-1.2, 2)} (-(-0.3) dq) = 0.3 * (-1.2)
  EXPECT_NEAR(ab.kappa, 0.3 + 0.3 * -1.2, 1e-14);
}

TEST(GroupCompose, Associativity) {
  Rng rng(39);
  for (int s = 0; s < 50; ++s) {
    const CanonicalMap g1 = random_catalog_map(rng), g2 = random_catalog_map(rng), g3 = random_catalog_map(rng);
    const CanonicalMap left = group_compose(group_compose(g1, g2), g3);
    const CanonicalMap right = group_compose(g1, group_compose(g2, g3));
    EXPECT_NEAR(left.kappa, right.kappa, 1e-8);
    EXPECT_LE(max_abs(left.matrix - right.matrix), 1e-12);
    EXPECT_LE(max_abs(left.offset - right.offset), 1e-12);
  }
}

TEST(EnsembleCsv, RoundTrip) {
  Rng rng(40);
  const auto e = random_ensemble(4, rng, 2);
  std::stringstream ss;
  write_ensemble_csv(ss, e);
  EXPECT_EQ(ss.str().substr(0, 12), "w,q0,q1,p0,p");
  const auto back = read_ensemble_csv(ss);
  EXPECT_EQ(back.weights, e.weights);
  for (std::size_t k = 0; k < e.size(); ++k) EXPECT_EQ(back.points[k].stacked(), e.points[k].stacked());
  std::stringstream bad("w,q0,p0\n1,2\n");
  EXPECT_THROW(read_ensemble_csv(bad), InputError);
}
