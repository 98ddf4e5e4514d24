#include <gtest/gtest.h>

#include <random>

#include "phtune/sim.hpp"
#include "phtune/spectral.hpp"
#include "test_support.hpp"

namespace phtune {
namespace {

using testing::manipulator_target;

Mat scalar(double v) { return Mat::Constant(1, 1, v); }

Gains scalar_gains(double kp, double ki, double kd) {
  return Gains{scalar(kp), scalar(ki), scalar(kd)};
}

TEST(Gains, Validation) {
  EXPECT_NO_THROW(scalar_gains(1, 1, 0).validate(1));
  EXPECT_THROW(scalar_gains(0, 1, 0).validate(1), Error);
  EXPECT_THROW(scalar_gains(1, -1, 0).validate(1), Error);
  EXPECT_THROW(scalar_gains(1, 1, -0.1).validate(1), Error);
  try {
    scalar_gains(1, 1, 0).validate(2);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Shape);
  }
}

TEST(BuildRpw, ManipulatorE1) {
  const auto arm = builtin_manipulator();
  const auto gains = testing::table_e1();
  const auto eq = assign_equilibrium(arm, manipulator_target(), gains.Ki);
  const RPW rpw = build_rpw(arm, gains, eq);
  EXPECT_NEAR(rpw.R(0, 0), 7.4672, 1e-12);
  EXPECT_NEAR(rpw.R(1, 1), 9.23, 1e-12);
  EXPECT_DOUBLE_EQ(rpw.R(0, 1), 0.0);
  EXPECT_DOUBLE_EQ(rpw.P(0, 0), 35.0);
  EXPECT_DOUBLE_EQ(rpw.P(1, 1), 20.0);
  EXPECT_LT((rpw.W - testing::manipulator_inertia(0.8)).norm(), 1e-15);
}

TEST(BuildRpw, ManipulatorRT) {
  const auto arm = builtin_manipulator();
  const auto gains = testing::table_rt();
  const auto eq = assign_equilibrium(arm, manipulator_target(), gains.Ki);
  const RPW rpw = build_rpw(arm, gains, eq);
  EXPECT_NEAR(rpw.R(0, 0), 1.07, 1e-12);
  EXPECT_NEAR(rpw.R(1, 1), 0.53, 1e-12);
  EXPECT_DOUBLE_EQ(rpw.P(0, 0), 50.0);
  EXPECT_DOUBLE_EQ(rpw.P(1, 1), 30.0);
  EXPECT_LT((rpw.W - testing::manipulator_inertia(0.8)).norm(), 1e-15);
}

TEST(BuildRpw, PendulumScalars) {
  const auto pend = builtin_pendulum(1, 1, 1, 0);
  const auto gains = scalar_gains(2, 1, 0);
  const auto eq = assign_equilibrium(pend, Vec::Zero(1), gains.Ki);
  const RPW rpw = build_rpw(pend, gains, eq);
  EXPECT_DOUBLE_EQ(rpw.R(0, 0), 2.0);
  EXPECT_DOUBLE_EQ(rpw.P(0, 0), 2.0);
  EXPECT_DOUBLE_EQ(rpw.W(0, 0), 1.0);
}

TEST(BuildRpw, InvertedPendulumViolatesAssumption) {
  // Upright pendulum with weak integral gain: ∇²V⋆ = −mgl dominates.
  const auto pend = builtin_pendulum(1, 1, 9.81, 0);
  const auto gains = scalar_gains(2, 1, 0);
  const auto eq = assign_equilibrium(pend, Vec::Constant(1, std::numbers::pi), gains.Ki);
  try {
    build_rpw(pend, gains, eq);
    FAIL();
  } catch (const AssumptionError& e) {
    EXPECT_EQ(e.kind(), ErrorKind::AssumptionFailure);
    EXPECT_NEAR(e.eigenvalue(), 1.0 - 9.81, 1e-9);
  }
}

TEST(CholeskyFactors, Examples) {
  const auto f = cholesky_factors(Mat::Identity(3, 3), 4.0 * Mat::Identity(3, 3));
  EXPECT_LT((f.phiP - Mat::Identity(3, 3)).norm(), 1e-15);
  EXPECT_LT((f.phiW - 0.5 * Mat::Identity(3, 3)).norm(), 1e-15);

  Mat P(2, 2);
  P << 4, 2, 2, 5;
  const auto g = cholesky_factors(P, Mat::Identity(2, 2));
  EXPECT_LT((g.phiP.transpose() * g.phiP - P).norm(), 1e-14);
  EXPECT_DOUBLE_EQ(g.phiP(1, 0), 0.0);
}

TEST(CholeskyFactors, ReportsFailingPivot) {
  Mat P(3, 3);
  P << 1, 0, 0, 0, 2, 0, 0, 0, -1;
  try {
    cholesky_factors(P, Mat::Identity(3, 3));
    FAIL();
  } catch (const DecompositionError& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Decomposition);
    EXPECT_EQ(e.pivot(), 2);
  }
}

TEST(CholeskyFactors, RandomReconstruction) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 1 + trial % 6;
    const Mat P = testing::random_spd(rng, n, 0.01, 100.0);
    const Mat W = testing::random_spd(rng, n, 0.01, 100.0);
    const auto f = cholesky_factors(P, W);
    EXPECT_LE(linalg::rel_frobenius(f.phiP.transpose() * f.phiP, P), 1e-12);
    const Mat Winv = W.inverse();
    EXPECT_LE(linalg::rel_frobenius(f.phiW.transpose() * f.phiW, Winv), 1e-12);
    EXPECT_TRUE(f.phiP.isUpperTriangular(0.0));
  }
}

TEST(SaddleMatrix, ScalarAssembly) {
  const Mat N = build_saddle_matrix(scalar(2), scalar(1), scalar(1));
  Mat expected(2, 2);
  expected << 2, 1, -1, 0;
  EXPECT_EQ(N, expected);
}

TEST(SaddleMatrix, IdentityBlocks) {
  const Mat I = Mat::Identity(2, 2);
  const Mat N = build_saddle_matrix(I, I, I);
  EXPECT_EQ(N.topLeftCorner(2, 2), I);
  EXPECT_EQ(N.topRightCorner(2, 2), I);
  EXPECT_EQ(N.bottomLeftCorner(2, 2), -I);
  EXPECT_TRUE(N.bottomRightCorner(2, 2).isZero(0.0));
}

TEST(SaddleMatrix, ShapeMismatch) {
  try {
    build_saddle_matrix(Mat::Identity(2, 2), Mat::Identity(3, 3), Mat::Identity(2, 2));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Shape);
  }
}

TEST(Linearize, PendulumTextbook) {
  const auto pend = builtin_pendulum(1, 1, 1, 0);
  const auto gains = scalar_gains(2, 1, 0);
  const auto eq = assign_equilibrium(pend, Vec::Zero(1), gains.Ki);
  Mat expected(2, 2);
  expected << 0, 1, -2, -2;
  EXPECT_LT((linearize_closed_loop(pend, gains, eq) - expected).norm(), 1e-15);
  Mat h(2, 2);
  h << 2, 0, 0, 1;
  EXPECT_LT((hessian_hd(pend, gains, eq) - h).norm(), 1e-15);
}

TEST(Linearize, ManipulatorE2HessianUpperBlock) {
  const auto arm = builtin_manipulator();
  const auto gains = testing::table_e2();
  const auto eq = assign_equilibrium(arm, manipulator_target(), gains.Ki);
  const Mat H = hessian_hd(arm, gains, eq);
  EXPECT_DOUBLE_EQ(H(0, 0), 50.0);
  EXPECT_DOUBLE_EQ(H(1, 1), 45.0);
  EXPECT_DOUBLE_EQ(H(0, 1), 0.0);
}

// ∇²H_d at the equilibrium against a finite-difference Hessian of H_d.
TEST(Linearize, HessianMatchesFiniteDifferences) {
  const auto arm = builtin_manipulator();
  const auto pend = builtin_pendulum(0.8, 1.2, 9.81, 0.05);
  struct Case {
    const MechanicalModel* model;
    Gains gains;
    Vec q_star;
  };
  const std::vector<Case> cases = {
      {&arm, testing::table_rt(), manipulator_target()},
      {&arm, testing::table_e1(), manipulator_target()},
      {&arm, testing::table_e2(), manipulator_target()},
      {&pend, scalar_gains(3, 20, 0.4), Vec::Constant(1, 0.5)},
  };
  for (const auto& c : cases) {
    const auto eq = assign_equilibrium(*c.model, c.q_star, c.gains.Ki);
    const int n = c.model->n;
    const auto hd = [&](const Vec& x) {
      return desired_hamiltonian(*c.model, c.gains, eq, x.head(n), x.tail(n));
    };
    Vec x0(2 * n);
    x0 << c.q_star, Vec::Zero(n);
    const Mat H_fd = testing::fd_hessian(hd, x0, 1e-4);
    const Mat H = hessian_hd(*c.model, c.gains, eq);
    EXPECT_LE(linalg::rel_frobenius(H, H_fd), 1e-4);
  }
}

TEST(Linearize, UpsilonIsIdentityWithoutDerivativeGain) {
  // With Kd = 0 the linearization reduces to F·∇²H_d.
  const auto arm = builtin_manipulator();
  const auto gains = testing::table_e1();
  const auto eq = assign_equilibrium(arm, manipulator_target(), gains.Ki);
  Mat F = Mat::Zero(4, 4);
  F.topRightCorner(2, 2) = Mat::Identity(2, 2);
  F.bottomLeftCorner(2, 2) = -Mat::Identity(2, 2);
  F.bottomRightCorner(2, 2) = -build_rpw(arm, gains, eq).R;
  EXPECT_LT((linearize_closed_loop(arm, gains, eq) - F * hessian_hd(arm, gains, eq)).norm(),
            1e-12);
}

// Jacobian of the nonlinear closed-loop field at the equilibrium, which
// includes the derivative-gain path through Ψ.
TEST(Linearize, MatchesJacobianOfNonlinearField) {
  const auto arm = builtin_manipulator();
  for (const auto& gains : {testing::table_rt(), testing::table_e1(), testing::table_e2()}) {
    const auto eq = assign_equilibrium(arm, manipulator_target(), gains.Ki);
    Vec x0(4);
    x0 << manipulator_target(), Vec::Zero(2);
    const auto f = [&](const Vec& x) { return closed_loop_field(arm, gains, eq, x); };
    const Mat J = testing::fd_jacobian(f, x0, 1e-6);
    const Mat A = linearize_closed_loop(arm, gains, eq);
    EXPECT_LE((J - A).norm(), 1e-6 * std::max(1.0, A.norm()));
  }

  // linear model with D = 0, Kd = 0
  Mat M(2, 2), K(2, 2);
  M << 2, 0.3, 0.3, 1;
  K << 3, -1, -1, 2;
  const auto lin = linear_model(M, K, Mat::Zero(2, 2), Mat::Identity(2, 2));
  const auto gains = Gains::diagonal(Eigen::Vector2d(1.5, 2.5), Eigen::Vector2d(4, 6),
                                     Eigen::Vector2d(0, 0));
  const auto eq = assign_equilibrium(lin, Eigen::Vector2d(0.2, -0.1), gains.Ki);
  Vec x0(4);
  x0 << 0.2, -0.1, 0, 0;
  const auto f = [&](const Vec& x) { return closed_loop_field(lin, gains, eq, x); };
  const Mat A = linearize_closed_loop(lin, gains, eq);
  EXPECT_LE((testing::fd_jacobian(f, x0, 1e-6) - A).norm(), 1e-6);
  // textbook form [[0, M⁻¹], [−P, −R M⁻¹]]
  Mat textbook = Mat::Zero(4, 4);
  textbook.topRightCorner(2, 2) = M.inverse();
  textbook.bottomLeftCorner(2, 2) = -(K + gains.Ki);
  textbook.bottomRightCorner(2, 2) = -gains.Kp * M.inverse();
  EXPECT_LE((A - textbook).norm(), 1e-12);
}

TEST(SaddleForm, TransformIsASimilarity) {
  const auto arm = builtin_manipulator();
  for (const auto& gains : {testing::table_rt(), testing::table_e1(), testing::table_e2()}) {
    const auto eq = assign_equilibrium(arm, manipulator_target(), gains.Ki);
    const auto s = make_saddle_form(arm, gains, eq);
    const Mat A = linearize_closed_loop(arm, gains, eq);
    // z = T x turns ẋ = A x into ż = −N z
    const Mat lhs = s.T * A;
    const Mat rhs = -s.N * s.T;
    EXPECT_LE((lhs - rhs).norm(), 1e-10 * std::max(1.0, lhs.norm()));
    EXPECT_TRUE(s.N.bottomRightCorner(2, 2).isZero(0.0));
    EXPECT_LE(linalg::rel_frobenius(s.phiP.transpose() * s.phiP, s.P), 1e-12);
    EXPECT_LE(linalg::rel_frobenius(s.phiW.transpose() * s.phiW, s.W.inverse()), 1e-12);
  }
}

// Random constant-coefficient plants and gains (with and without Kd).
TEST(SaddleForm, SimilarityInvarianceRandom) {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 1 + trial % 5;
    const auto t = testing::random_triple(rng, n, trial % 3 == 0);
    const auto inst = testing::instance_from_triple(rng, t);
    const auto s = make_saddle_form(inst.model, inst.gains, inst.eq);
    const Mat A = linearize_closed_loop(inst.model, inst.gains, inst.eq);
    const auto eig_n = eigen_saddle(s.N);
    const auto eig_a = eigen_saddle(A);
    EXPECT_LE(testing::spectrum_distance(eig_n, testing::negated(eig_a)), 1e-8)
        << "trial " << trial;
    EXPECT_LE(linalg::rel_frobenius(s.R, t.R), 1e-14);
    EXPECT_LE(linalg::rel_frobenius(s.P, t.P), 1e-14);
    EXPECT_LE(linalg::rel_frobenius(s.W, t.W), 1e-14);
  }
}

TEST(SaddleForm, LinearizationSpectrumInLeftHalfPlane) {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 50; ++trial) {
    const auto t = testing::random_triple(rng, 1 + trial % 4, false);
    const auto inst = testing::instance_from_triple(rng, t);
    for (const auto& e : eigen_saddle(linearize_closed_loop(inst.model, inst.gains, inst.eq))) {
      EXPECT_LE(e.real(), 1e-9);
    }
  }
}

}  // namespace
}  // namespace phtune
