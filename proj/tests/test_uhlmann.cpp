#include "momap/random.hpp"
#include "momap/uhlmann.hpp"

#include <gtest/gtest.h>

#include <sstream>

using namespace momap;

namespace {

/// Admissible hybrid state U (e1, c E_21) U^dagger with rho = U diag(1 - c^2, c^2, 0...) U^dagger.
HybridState admissible_hybrid(Eigen::Index n, double c, Rng& rng) {
  const CMatrix u = random_unitary(n, rng);
  CMatrix nil = CMatrix::Zero(n, n);
  nil(1, 0) = c;
  return HybridState(WaveFunction(u.col(0)), WOperator(u * nil * u.adjoint()));
}

}  // namespace

TEST(RhoFromW, Examples) {
  Rng rng(11);
  const CVector psi = random_unit_vector(4, rng);
  EXPECT_LT(max_abs(rho_from_w(WOperator(psi)).entries - psi * psi.adjoint()), 1e-15);
  const WOperator mixed(CMatrix::Identity(3, 3) / std::sqrt(3.0));
  EXPECT_LT(max_abs(rho_from_w(mixed).entries - CMatrix::Identity(3, 3) / 3.0), 1e-15);
  for (int k = 0; k < 50; ++k) {
    const WOperator w(random_cmatrix(5, 3, rng));
    const DensityOperator rho = rho_from_w(w);
    EXPECT_GE(rho.min_eigenvalue(), -1e-10);
    EXPECT_NEAR(rho.trace, w.entries.squaredNorm(), 1e-12);
  }
  EXPECT_THROW(WOperator(CMatrix::Constant(2, 2, Complex(std::nan(""), 0.0))), InputError);
}

TEST(RhoFromW, Equivariance) {
  Rng rng(12);
  for (int k = 0; k < 20; ++k) {
    const WOperator w(random_cmatrix(4, 2, rng));
    const CMatrix u = random_unitary(4, rng);
    EXPECT_LT(max_abs(rho_from_w(WOperator(u * w.entries)).entries - u * rho_from_w(w).entries * u.adjoint()), 1e-11);
  }
}

TEST(WSymplecticForm, Examples) {
  Rng rng(13);
  CMatrix a = random_cmatrix(3, 2, rng);
  a /= a.norm();
  const double hbar = 0.7;
  const WOperator w1(a, hbar);
  EXPECT_EQ(w_symplectic_form(w1, w1), 0.0);
  EXPECT_NEAR(w_symplectic_form(w1, WOperator(I * a, hbar)), 2 * hbar, 1e-14);
  const WOperator w2(random_cmatrix(3, 2, rng), hbar);
  EXPECT_NEAR(w_symplectic_form(w1, w2), -w_symplectic_form(w2, w1), 1e-14);
  CMatrix top = CMatrix::Zero(4, 2), bottom = CMatrix::Zero(4, 2);
  top.topRows(2) = random_cmatrix(2, 2, rng);
  bottom.bottomRows(2) = random_cmatrix(2, 2, rng);
  EXPECT_EQ(w_symplectic_form(WOperator(top), WOperator(bottom)), 0.0);
  EXPECT_THROW(w_symplectic_form(w1, WOperator(random_cmatrix(2, 2, rng), hbar)), InputError);
}

TEST(EvolveW, Examples) {
  Rng rng(14);
  const WOperator w0(random_cmatrix(3, 2, rng));
  EXPECT_LT(max_abs(evolve_w(w0, HermitianOperator(CMatrix::Zero(3, 3)), 2.0).entries - w0.entries), 1e-15);
  const HermitianOperator h(random_hermitian(3, rng));
  EXPECT_LT(max_abs(evolve_w(w0, h, 0.0).entries - w0.entries), 1e-14);

  CMatrix d = CMatrix::Zero(2, 2);
  d(1, 1) = 1.0;
  const WOperator half(CMatrix::Identity(2, 2) / std::sqrt(2.0));
  const WOperator wt = evolve_w(half, HermitianOperator(d), pi);
  CMatrix expect = CMatrix::Identity(2, 2) / std::sqrt(2.0);
  expect(1, 1) *= -1.0;
  EXPECT_LT(max_abs(wt.entries - expect), 1e-14);
  EXPECT_LT(max_abs(rho_from_w(wt).entries - CMatrix::Identity(2, 2) / 2.0), 1e-14);

  const CMatrix u = unitary_propagator(h, 1.3);
  EXPECT_LT(max_abs(rho_from_w(evolve_w(w0, h, 1.3)).entries - u * rho_from_w(w0).entries * u.adjoint()), 1e-11);
  EXPECT_THROW(evolve_w(w0, HermitianOperator(CMatrix::Identity(2, 2)), 1.0), InputError);
}

TEST(AdjointMomentumMap, Examples) {
  Rng rng(15);
  const double hbar = 1.3;
  const WOperator herm(random_hermitian(4, rng), hbar);
  EXPECT_LT(max_abs(adjoint_momentum_map(herm).entries), 1e-13);

  CMatrix n = CMatrix::Zero(2, 2);
  n(0, 1) = 1.0;
  CMatrix expect = CMatrix::Zero(2, 2);
  expect(0, 0) = -I * hbar;
  expect(1, 1) = I * hbar;
  EXPECT_LT(max_abs(adjoint_momentum_map(WOperator(n, hbar)).entries - expect), 1e-15);

  for (int k = 0; k < 200; ++k) {
    const Eigen::Index dim = 1 + static_cast<Eigen::Index>(k % 8);
    const WOperator w(random_cmatrix(dim, dim, rng));
    EXPECT_LE(std::abs(adjoint_momentum_map(w).entries.trace()), 1e-12);
    const CMatrix u = random_unitary(dim, rng);
    EXPECT_LT(max_abs(adjoint_momentum_map(WOperator(u * w.entries * u.adjoint())).entries -
                      u * adjoint_momentum_map(w).entries * u.adjoint()),
              1e-11);
  }
  EXPECT_THROW(adjoint_momentum_map(WOperator(random_cmatrix(3, 2, rng))), InputError);
}

TEST(Hybrid, CommutingSquare) {
  Rng rng(16);
  for (int k = 0; k < 20; ++k) {
    const HybridState s0 = admissible_hybrid(4, 0.4, rng);
    ASSERT_TRUE(s0.admissible());
    const HermitianOperator h(random_hermitian(4, rng));
    const auto r = evolve_hybrid(s0, h, 0.9);
    const DensityOperator ref = evolve_density(s0.density(), h, 0.9);
    EXPECT_LT(max_abs(r.rho.entries - ref.entries), 1e-11);
    EXPECT_NEAR(r.rho.trace, 1.0, 1e-12);
    EXPECT_NEAR(r.rho.purity_defect(), s0.density().purity_defect(), 1e-11);
  }
}

TEST(Hybrid, NormalWStaysPure) {
  Rng rng(17);
  const CVector psi = random_unit_vector(3, rng);
  const HybridState s0(WaveFunction(psi), WOperator(random_hermitian(3, rng)));
  const HermitianOperator h(random_hermitian(3, rng));
  const auto r = evolve_hybrid(s0, h, 0.6);
  const CVector pt = unitary_propagator(h, 0.6) * psi;
  EXPECT_LT(max_abs(r.rho.entries - pt * pt.adjoint()), 1e-12);
  EXPECT_LT(r.rho.purity_defect(), 1e-12);

  const auto still = evolve_hybrid(s0, HermitianOperator(CMatrix::Zero(3, 3)), 5.0);
  EXPECT_LT(max_abs(still.state.psi.components - psi), 1e-15);
  EXPECT_LT(max_abs(still.state.w.entries - s0.w.entries), 1e-14);
}

TEST(Hybrid, AdmissibilityGateRejectsNonPositive) {
  CVector e1 = CVector::Zero(2);
  e1(0) = 1.0;
  CMatrix w = CMatrix::Zero(2, 2);
  w(0, 1) = 0.5;
  const HybridState s0{WaveFunction(e1), WOperator(w)};
  EXPECT_NEAR(s0.density().entries(0, 0).real(), 1.25, 1e-15);
  EXPECT_NEAR(s0.density().entries(1, 1).real(), -0.25, 1e-15);
  EXPECT_FALSE(s0.admissible());
  CMatrix x = CMatrix::Zero(2, 2);
  x(0, 1) = x(1, 0) = 1.0;
  try {
    evolve_hybrid(s0, HermitianOperator(x), pi / 4);
    FAIL() << "non-positive hybrid density accepted";
  } catch (const AdmissibilityError& e) {
    EXPECT_NEAR(e.value(), -0.25, 1e-12);
  }
  EXPECT_THROW(HybridState(WaveFunction(e1), WOperator(CMatrix::Identity(3, 3))), InputError);
}

TEST(MatrixCsv, RoundTrip) {
  Rng rng(18);
  const CMatrix m = random_cmatrix(3, 2, rng);
  std::stringstream ss;
  write_matrix_csv(ss, m);
  EXPECT_EQ(read_matrix_csv(ss), m);
  std::istringstream bad("row,col,re,im\n0,0,1\n");
  EXPECT_THROW(read_matrix_csv(bad), InputError);
  std::istringstream sparse("row,col,re,im\n1,1,1,0\n");
  EXPECT_THROW(read_matrix_csv(sparse), InputError);
}
