#include "momap/mixtures.hpp"
#include "momap/random.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <sstream>

using namespace momap;

namespace {

WaveFunction wf2(Complex a, Complex b) {
  CVector v(2);
  v << a, b;
  return WaveFunction(v);
}

WaveFamily cos_sin_family(const ParameterGrid& g) {
  return WaveFamily::from_function(g, 2, [](const Eigen::Vector3d& r) {
    CVector v(2);
    v << std::cos(r(0)), std::sin(r(0));
    return v;
  });
}

// Composite Simpson rule on [a,b] with n (even) panels; independent of the grid code.
template <class F>
double simpson(F f, double a, double b, int n) {
  const double h = (b - a) / n;
  double s = f(a) + f(b);
  for (int i = 1; i < n; ++i) s += (i % 2 ? 4.0 : 2.0) * f(a + i * h);
  return s * h / 3.0;
}

}  // namespace

TEST(DensityFromMixture, Examples) {
  auto r1 = density_from_mixture(DiscreteMixture({1.0}, {wf2(1, 0)}));
  CMatrix e = CMatrix::Zero(2, 2);
  e(0, 0) = 1;
  EXPECT_LT(max_abs(r1.entries - e), 1e-15);

  auto r2 = density_from_mixture(DiscreteMixture({0.5, 0.5}, {wf2(1, 0), wf2(0, 1)}));
  EXPECT_LT(max_abs(r2.entries - CMatrix::Identity(2, 2) / 2.0), 1e-15);

  const double s = 1.0 / std::sqrt(2.0);
  auto r3 = density_from_mixture(DiscreteMixture({0.5, 0.5}, {wf2(1, 0), wf2(s, s)}));
  CMatrix expect(2, 2);
  expect << 0.75, 0.25, 0.25, 0.25;
  EXPECT_LT(max_abs(r3.entries - expect), 1e-15);
}

TEST(DensityFromMixture, RejectsNegativeWeightAndFlagsNormalization) {
  EXPECT_THROW(DiscreteMixture({-0.5, 1.5}, {wf2(1, 0), wf2(0, 1)}), InputError);
  DiscreteMixture unnormalized({0.4, 0.4}, {wf2(1, 0), wf2(0, 1)});
  EXPECT_FALSE(unnormalized.admissible());
  EXPECT_NEAR(density_from_mixture(unnormalized).trace, 0.8, 1e-15);
  EXPECT_TRUE(DiscreteMixture({0.5, 0.5}, {wf2(1, 0), wf2(0, 1)}).admissible());
}

TEST(DensityFromMixture, LinearInWeightsAndPositive) {
  Rng rng(21);
  for (int s = 0; s < 20; ++s) {
    std::vector<WaveFunction> states;
    std::vector<double> wa, wb, wsum;
    for (int k = 0; k < 4; ++k) {
      states.emplace_back(random_unit_vector(3, rng));
      wa.push_back(uniform(rng, 0.1, 1));
      wb.push_back(uniform(rng, 0.1, 1));
      wsum.push_back(wa.back() + 2.0 * wb.back());
    }
    auto ra = density_from_mixture(DiscreteMixture(wa, states));
    auto rb = density_from_mixture(DiscreteMixture(wb, states));
    auto rs = density_from_mixture(DiscreteMixture(wsum, states));
    EXPECT_LT(max_abs(rs.entries - ra.entries - 2.0 * rb.entries), 1e-12);
    EXPECT_GE(rs.min_eigenvalue(), -1e-10);
  }
}

TEST(DensityFromFamily, Examples) {
  auto g = ParameterGrid::line(0.0, pi, 65, Boundary::open);
  CVector psi0 = CVector::Zero(2);
  psi0 << Complex(0.6, 0.0), Complex(0.0, 0.8);
  auto constant = WaveFamily::from_function(g, 2, [&](const Eigen::Vector3d&) { return psi0; });
  auto w = WeightDensity::uniform(g);
  EXPECT_LT(max_abs(density_from_family(w, constant).entries - psi0 * psi0.adjoint()), 1e-14);
  EXPECT_EQ(max_abs(density_from_family(WeightDensity(g, RVector::Zero(g.node_count())), constant).entries), 0.0);
}

TEST(DensityFromFamily, CosSinFamilyConvergesToHalfIdentity) {
  // Closed form: (1/pi) int_0^pi [cos^2, cos sin; cos sin, sin^2] dr = I/2.
  std::vector<double> errs, hs;
  for (Eigen::Index n : {9, 17, 33, 65}) {
    auto g = ParameterGrid::line(0.0, pi, n, Boundary::open);
    auto rho = density_from_family(WeightDensity::uniform(g), cos_sin_family(g));
    const double err = max_abs(rho.entries - CMatrix::Identity(2, 2) / 2.0);
    EXPECT_LT(err, 2.0 * g.spacing(0) * g.spacing(0));
    errs.push_back(err);
    hs.push_back(g.spacing(0));
  }
}

TEST(DensityFromFamily, GridMismatchThrows) {
  auto g1 = ParameterGrid::line(0.0, 1.0, 8, Boundary::open);
  auto g2 = ParameterGrid::line(0.0, 1.0, 9, Boundary::open);
  EXPECT_THROW(density_from_family(WeightDensity::uniform(g1), cos_sin_family(g2)), InputError);
}

TEST(DensityFromFamily, EquivarianceAndReparameterization) {
  Rng rng(22);
  auto g = ParameterGrid::line(0.0, 1.0, 32, Boundary::periodic);
  CMatrix states(3, g.node_count());
  RVector wv(g.node_count());
  for (Eigen::Index i = 0; i < g.node_count(); ++i) {
    states.col(i) = random_unit_vector(3, rng);
    wv(i) = uniform(rng, 0.0, 2.0);
  }
  WaveFamily fam(g, states);
  WeightDensity w(g, wv);
  auto rho = density_from_family(w, fam);
  CMatrix u = random_unitary(3, rng);
  EXPECT_LT(max_abs(density_from_family(w, apply_unitary(u, fam)).entries - u * rho.entries * u.adjoint()), 1e-11);

  std::vector<Eigen::Index> perm(static_cast<std::size_t>(g.node_count()));
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  CMatrix ps(3, g.node_count());
  RVector pw(g.node_count());
  for (Eigen::Index i = 0; i < g.node_count(); ++i) {
    ps.col(i) = states.col(perm[static_cast<std::size_t>(i)]);
    pw(i) = wv(perm[static_cast<std::size_t>(i)]);
  }
  EXPECT_LT(max_abs(density_from_family(WeightDensity(g, pw), WaveFamily(g, ps)).entries - rho.entries), 1e-14);
}

TEST(DensityFromMultiFamily, Examples) {
  auto g = ParameterGrid::line(0.0, pi, 33, Boundary::open);
  auto fam = cos_sin_family(g);
  auto w = WeightDensity::uniform(g);
  auto half = WeightDensity::uniform(g, 0.5);
  auto single = density_from_family(w, fam);
  EXPECT_LT(max_abs(density_from_multifamily(MultiFamily({{w, fam}})).entries - single.entries), 1e-15);
  EXPECT_LT(max_abs(density_from_multifamily(MultiFamily({{half, fam}, {half, fam}})).entries - single.entries),
            1e-12);

  CVector e1 = CVector::Zero(2), e2 = CVector::Zero(2);
  e1(0) = 1;
  e2(1) = 1;
  auto f1 = WaveFamily::from_function(g, 2, [&](const Eigen::Vector3d&) { return e1; });
  auto f2 = WaveFamily::from_function(g, 2, [&](const Eigen::Vector3d&) { return e2; });
  EXPECT_LT(max_abs(density_from_multifamily(MultiFamily({{half, f1}, {half, f2}})).entries -
                    CMatrix::Identity(2, 2) / 2.0),
            1e-14);

  auto g3 = ParameterGrid::line(0.0, pi, 34, Boundary::open);
  EXPECT_THROW(MultiFamily({{w, fam}, {WeightDensity::uniform(g3), cos_sin_family(g3)}}), InputError);
}

TEST(FamilySymplecticForm, Examples) {
  Rng rng(23);
  auto g = ParameterGrid::square(0.0, 1.0, 8, Boundary::periodic);
  auto w = WeightDensity::uniform(g);
  CMatrix d(2, g.node_count());
  for (Eigen::Index i = 0; i < g.node_count(); ++i) d.col(i) = random_unit_vector(2, rng);
  WaveFamily d1(g, d, 1.5);
  EXPECT_NEAR(family_symplectic_form(w, d1, d1), 0.0, 1e-15);
  EXPECT_NEAR(family_symplectic_form(w, d1, WaveFamily(g, I * d, 1.5)), 3.0, 1e-12);

  CMatrix a = CMatrix::Zero(2, g.node_count()), b = CMatrix::Zero(2, g.node_count());
  a.leftCols(10) = d.leftCols(10);
  b.rightCols(10) = d.rightCols(10);
  EXPECT_EQ(family_symplectic_form(w, WaveFamily(g, a), WaveFamily(g, b)), 0.0);
}

TEST(EvolveFamily, ExamplesAndCommutingSquare) {
  Rng rng(24);
  auto g = ParameterGrid::line(-1.0, 1.0, 64, Boundary::periodic);
  CMatrix s(4, g.node_count());
  for (Eigen::Index i = 0; i < g.node_count(); ++i) s.col(i) = random_unit_vector(4, rng);
  WaveFamily fam(g, s);
  HermitianOperator h(random_hermitian(4, rng));
  EXPECT_LT(max_abs(evolve_family(fam, h, 0.0).states - fam.states), 1e-14);

  CMatrix d = CMatrix::Zero(4, 4);
  d(1, 1) = 1;
  d(2, 2) = 2;
  d(3, 3) = 3;
  EXPECT_LT(max_abs(evolve_family(fam, HermitianOperator(d), 2 * pi).states - fam.states), 1e-11);

  auto w = WeightDensity::from_function(g, [](const Eigen::Vector3d& r) { return 1.0 + 0.5 * std::sin(pi * r(0)); });
  const double t = 0.83;
  auto lhs = density_from_family(w, evolve_family(fam, h, t));
  auto rhs = evolve_density(density_from_family(w, fam), h, t);
  EXPECT_LT(max_abs(lhs.entries - rhs.entries), 1e-11);
  EXPECT_NEAR(evolve_family(fam, h, t).pnc_defect(), fam.pnc_defect(), 1e-11);

  EXPECT_THROW(evolve_family(fam, HermitianOperator(CMatrix::Zero(3, 3)), 1.0), InputError);
}

TEST(BornOppenheimer, FactorizedCase) {
  auto g = ParameterGrid::line(-6.0, 6.0, 121, Boundary::open);
  CVector chi(g.node_count());
  for (Eigen::Index i = 0; i < g.node_count(); ++i) {
    const double r = g.coordinate(i, 0);
    chi(i) = std::exp(-r * r / 2.0) * std::exp(I * 0.3 * r);
  }
  NuclearAmplitude amp(g, chi);
  CVector psi0(2);
  psi0 << Complex(0.6, 0), Complex(0, 0.8);
  auto fam = WaveFamily::from_function(g, 2, [&](const Eigen::Vector3d&) { return psi0; });
  auto bo = bo_partial_traces(amp, fam);
  EXPECT_LT(max_abs(bo.electronic.entries - amp.squared_norm * psi0 * psi0.adjoint()), 1e-13);
  ASSERT_TRUE(bo.nuclear_kernel.has_value());
  EXPECT_LT(max_abs(*bo.nuclear_kernel - chi * chi.adjoint()), 1e-14);
}

TEST(BornOppenheimer, TwoLevelFamilyAgainstSimpsonReference) {
  // chi Gaussian normalized, psi(r) = (cos r, sin r): PNC exact.
  const double norm = std::pow(pi, -0.25);
  auto chi_f = [&](double r) { return norm * std::exp(-r * r / 2.0); };
  auto g = ParameterGrid::line(-9.0, 9.0, 181, Boundary::open);
  CVector chi(g.node_count());
  for (Eigen::Index i = 0; i < g.node_count(); ++i) chi(i) = chi_f(g.coordinate(i, 0));
  auto bo = bo_partial_traces(NuclearAmplitude(g, chi), cos_sin_family(g));
  EXPECT_TRUE(bo.warnings.empty());

  auto ref = [&](auto f) { return simpson([&](double r) { return chi_f(r) * chi_f(r) * f(r); }, -12.0, 12.0, 20000); };
  const double c2 = ref([](double r) { return std::cos(r) * std::cos(r); });
  const double s2 = ref([](double r) { return std::sin(r) * std::sin(r); });
  const double cs = ref([](double r) { return std::cos(r) * std::sin(r); });
  EXPECT_NEAR(bo.electronic.entries(0, 0).real(), c2, 1e-10);
  EXPECT_NEAR(bo.electronic.entries(1, 1).real(), s2, 1e-10);
  EXPECT_NEAR(bo.electronic.entries(0, 1).real(), cs, 1e-10);
  EXPECT_NEAR(bo.electronic.trace, 1.0, 1e-10);

  // Neither reduced state is pure.
  EXPECT_GT(bo.electronic.purity_defect(), 1e-3);
  auto k = bo.nuclear_operator(g);
  ASSERT_TRUE(k.has_value());
  EXPECT_NEAR(k->trace().real(), 1.0, 1e-10);
  EXPECT_LT((*k * *k).trace().real(), 1.0 - 1e-3);
}

TEST(BornOppenheimer, WarnsOnPncAndBoundaryMass) {
  auto g = ParameterGrid::line(-1.0, 1.0, 21, Boundary::open);
  CVector chi = CVector::Ones(g.node_count());
  CMatrix s = CMatrix::Constant(2, g.node_count(), Complex(1.0, 0.0));
  auto bo = bo_partial_traces(NuclearAmplitude(g, chi), WaveFamily(g, s));
  EXPECT_EQ(bo.warnings.size(), 2u);

  auto g2 = ParameterGrid::square(0.0, 1.0, 5, Boundary::open);
  auto bo2 = bo_partial_traces(NuclearAmplitude(g2, CVector::Ones(g2.node_count())),
                               WaveFamily(g2, CMatrix::Constant(1, g2.node_count(), Complex(1.0, 0.0))));
  EXPECT_FALSE(bo2.nuclear_kernel.has_value());
}

TEST(FamilyCsv, RoundTripAndErrors) {
  Rng rng(41);
  const ParameterGrid g = ParameterGrid::square(0.0, 1.0, 5, Boundary::open);
  const WeightDensity w = WeightDensity::from_function(g, [](const Eigen::Vector3d& r) { return 1.0 + r(0) * r(1); });
  const WaveFamily fam(g, random_cmatrix(3, g.node_count(), rng), 0.5);
  std::stringstream ss;
  write_family_csv(ss, w, fam);
  const auto [w2, fam2] = read_family_csv(ss, g, 0.5);
  EXPECT_EQ(w2.values, w.values);
  EXPECT_EQ(fam2.states, fam.states);
  EXPECT_EQ(fam2.hbar, 0.5);

  std::stringstream again;
  write_family_csv(again, w, fam);
  std::string text = again.str();
  const auto last = text.rfind('\n', text.size() - 2);
  std::istringstream missing(text.substr(0, last + 1));
  EXPECT_THROW(read_family_csv(missing, g), InputError);
  std::istringstream wrong_grid(again.str());
  EXPECT_THROW(read_family_csv(wrong_grid, ParameterGrid::square(0.0, 2.0, 5, Boundary::open)), InputError);
  std::istringstream no_header("x,y\n");
  EXPECT_THROW(read_family_csv(no_header, g), InputError);
}
