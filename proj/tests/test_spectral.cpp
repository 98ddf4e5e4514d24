#include <gtest/gtest.h>

#include <random>

#include "phtune/spectral.hpp"
#include "test_support.hpp"

namespace phtune {
namespace {

using testing::manipulator_target;

Mat scalar(double v) { return Mat::Constant(1, 1, v); }

SaddleForm manipulator_form(const Gains& gains) {
  const auto arm = builtin_manipulator();
  const auto eq = assign_equilibrium(arm, manipulator_target(), gains.Ki);
  return make_saddle_form(arm, gains, eq);
}

SaddleForm form_of(const testing::Triple& t) {
  SaddleForm s;
  s.R = t.R;
  s.P = t.P;
  s.W = t.W;
  const auto f = cholesky_factors(t.P, t.W);
  s.phiP = f.phiP;
  s.phiW = f.phiW;
  s.N = build_saddle_matrix(t.R, f.phiP, f.phiW);
  return s;
}

TEST(EigenSaddle, ScalarExamples) {
  Mat N(2, 2);
  N << 2, 1, -1, 0;
  auto e = eigen_saddle(N);
  ASSERT_EQ(e.size(), 2u);
  // double root: perturbation of order √eps
  EXPECT_NEAR(e[0].real(), 1.0, 1e-7);
  EXPECT_NEAR(e[1].real(), 1.0, 1e-7);

  N << 1, 1, -1, 0;
  e = eigen_saddle(N);
  EXPECT_NEAR(e[0].real(), 0.5, 1e-14);
  EXPECT_NEAR(e[0].imag(), -std::sqrt(3.0) / 2.0, 1e-14);
  EXPECT_NEAR(e[1].imag(), std::sqrt(3.0) / 2.0, 1e-14);
}

TEST(EigenSaddle, RejectsNonFinite) {
  Mat N = Mat::Identity(2, 2);
  N(0, 1) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(eigen_saddle(N), Error);
  EXPECT_THROW(eigen_saddle(Mat::Zero(2, 3)), Error);
}

TEST(EigenSaddle, MatchesCharacteristicPolynomialOracle) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 30; ++trial) {
    const auto t = testing::random_triple(rng, 3, trial % 2 == 0);
    const Mat N = form_of(t).N;
    const auto roots = testing::polynomial_roots(testing::characteristic_polynomial(N));
    EXPECT_LE(testing::spectrum_distance(eigen_saddle(N), roots), 1e-8) << "trial " << trial;
  }
}

TEST(EigenSaddle, PairsHaveSmallResiduals) {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 50; ++trial) {
    const Mat N = form_of(testing::random_triple(rng, 1 + trial % 5, false)).N;
    for (const auto& pr : eigen_saddle_pairs(N)) {
      const CVec r = N.cast<Complex>() * pr.vector - pr.value * pr.vector;
      EXPECT_LE(r.norm(), 1e-9 * N.norm() * pr.vector.norm());
    }
  }
}

TEST(RealityTest, ScalarExamples) {
  CVec v(1);
  v << Complex(1.0, 0.0);
  EXPECT_TRUE(theorem1_reality_test(scalar(2), scalar(1), v));
  EXPECT_FALSE(theorem1_reality_test(scalar(1), scalar(1), v));
  try {
    theorem1_reality_test(scalar(1), scalar(1), CVec::Zero(1));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::InvalidArgument);
  }
}

TEST(Bands, ScalarAndDiagonal) {
  const auto b = corollary1_bounds(scalar(2), scalar(1));
  EXPECT_DOUBLE_EQ(b.complex_re_lo, 1.0);
  EXPECT_DOUBLE_EQ(b.complex_re_hi, 1.0);
  EXPECT_DOUBLE_EQ(b.real_lo, 0.5);
  EXPECT_DOUBLE_EQ(b.real_hi, 2.0);
  EXPECT_FALSE(b.advisory);

  const auto d = corollary1_bounds(Eigen::Vector2d(1, 3).asDiagonal().toDenseMatrix(),
                                   Mat::Identity(2, 2));
  EXPECT_DOUBLE_EQ(d.complex_re_lo, 0.5);
  EXPECT_DOUBLE_EQ(d.complex_re_hi, 1.5);
}

TEST(Bands, SingularXIsAdvisory) {
  Mat X = Mat::Zero(2, 2);
  X(0, 0) = 1.0;
  EXPECT_TRUE(corollary1_bounds(X, Mat::Identity(2, 2)).advisory);
  Mat A(2, 2);
  A << 1, 2, 0, 1;
  try {
    corollary1_bounds(A, Mat::Identity(2, 2));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::InvalidArgument);
  }
}

TEST(Prop1, Examples) {
  const Mat I = Mat::Identity(2, 2);
  const auto crit = prop1_check(2 * I, I, I);
  EXPECT_TRUE(crit.satisfied);
  EXPECT_DOUBLE_EQ(crit.margin, 0.0);

  const auto e1 = manipulator_form(testing::table_e1());
  const auto r1 = prop1_check(e1.R, e1.P, e1.W);
  EXPECT_TRUE(r1.satisfied);
  // eigen-oracle: closed-form 2 × 2 eigenvalues of the inertia
  const double w_max = testing::sym2_eigenvalues(testing::manipulator_inertia(0.8)).second;
  EXPECT_NEAR(4 * 35 * w_max, 55.169445, 1e-6);
  EXPECT_NEAR(4 * 35 * w_max, 55.2, 0.05);
  EXPECT_NEAR(r1.margin, 7.4672 * 7.4672 - 4 * 35 * w_max, 1e-10);

  const auto rt = manipulator_form(testing::table_rt());
  const auto r2 = prop1_check(rt.R, rt.P, rt.W);
  EXPECT_FALSE(r2.satisfied);
  EXPECT_NEAR(r2.margin, 0.53 * 0.53 - 4 * 50 * w_max, 1e-10);
}

TEST(DampingRatio, Examples) {
  EXPECT_DOUBLE_EQ(damping_ratio({1.0, 0.0}), 1.0);
  EXPECT_NEAR(damping_ratio({0.5, std::sqrt(3.0) / 2.0}), 0.5, 1e-15);
  EXPECT_DOUBLE_EQ(damping_ratio({3.0, 4.0}), 0.6);
  try {
    damping_ratio({0.0, 0.0});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::UndefinedRatio);
  }
}

TEST(ZetaBounds, Examples) {
  const Mat I = Mat::Identity(2, 2);
  auto z = zeta_bounds(I, I, I);
  EXPECT_DOUBLE_EQ(z.zeta_min, 0.25);
  EXPECT_DOUBLE_EQ(z.zeta_max, 0.25);
  for (const auto& e : eigen_saddle(build_saddle_matrix(I, I, I))) {
    EXPECT_NEAR(damping_ratio(e), 0.5, 1e-12);
  }
  z = zeta_bounds(2 * I, I, I);
  EXPECT_DOUBLE_EQ(z.zeta_min, 1.0);
  EXPECT_DOUBLE_EQ(z.zeta_max, 1.0);
  EXPECT_THROW(zeta_bounds(I, -I, I), Error);
}

TEST(ZetaBounds, ManipulatorE2) {
  const auto s = manipulator_form(testing::table_e2());
  const auto z = zeta_bounds(s.R, s.P, s.W);
  EXPECT_NEAR(z.zeta_min, 0.163, 5e-4);
  EXPECT_NEAR(z.zeta_max, 0.628, 5e-4);
  EXPECT_NEAR(std::sqrt(z.zeta_min), 0.40404, 1e-4);
  EXPECT_NEAR(std::sqrt(z.zeta_max), 0.79251, 1e-4);
}

TEST(Scenario, Classification) {
  using C = Complex;
  EXPECT_EQ(classify_scenario({C(1, 0), C(1, 0), C(2, 0), C(3, 0)}, 1e-9), Scenario::S1);
  EXPECT_EQ(classify_scenario({C(1, 2), C(1, -2), C(0.5, 1), C(0.5, -1)}, 1e-9), Scenario::S2);
  EXPECT_EQ(classify_scenario({C(1, 0), C(1, 0), C(0.5, 1), C(0.5, -1)}, 1e-9), Scenario::S3);
  EXPECT_THROW(classify_scenario({}, 1e-9), Error);
}

TEST(RiseTime, ScalarExample) {
  const auto r = rise_time_bound(scalar(2), scalar(1), scalar(1), Scenario::S1);
  EXPECT_DOUBLE_EQ(r.re_lambda_u, 0.5);
  EXPECT_DOUBLE_EQ(r.t_ru, 8.0);
  EXPECT_FALSE(r.advisory);
}

TEST(RiseTime, ManipulatorNominal) {
  struct Row {
    Gains gains;
    Scenario scenario;
    double t_ru;
  };
  for (const auto& row : {Row{testing::table_rt(), Scenario::S2, 3.397},
                          Row{testing::table_e1(), Scenario::S1, 1.846},
                          Row{testing::table_e2(), Scenario::S2, 0.966}}) {
    const auto rep = analyze_saddle(manipulator_form(row.gains));
    EXPECT_EQ(rep.scenario, row.scenario);
    EXPECT_NEAR(rep.rise.t_ru, row.t_ru, 1e-3);
  }
  const auto e1 = analyze_saddle(manipulator_form(testing::table_e1()));
  EXPECT_NEAR(e1.rise.rp_min, std::min(35 / 7.4672, 20 / 9.23), 1e-12);
}

TEST(RiseTime, SingularRFallsBack) {
  Mat R = Mat::Zero(2, 2);
  R(0, 0) = 2.0;
  const auto r = rise_time_bound(R, Mat::Identity(2, 2), Mat::Identity(2, 2), Scenario::S3);
  EXPECT_TRUE(r.advisory);
  EXPECT_DOUBLE_EQ(r.rp_min, 0.5);
}

TEST(Report, ManipulatorSpectra) {
  // frozen from an independent eigen-decomposition
  const auto rt = analyze_saddle(manipulator_form(testing::table_rt()));
  const std::vector<Complex> rt_ref = {{1.1858, -10.681}, {1.1858, 10.681},
                                       {16.884, -39.206}, {16.884, 39.206}};
  EXPECT_LE(testing::spectrum_distance(rt.eigenvalues, rt_ref), 2e-3);

  const auto e1 = analyze_saddle(manipulator_form(testing::table_e1()));
  const std::vector<Complex> e1_ref = {{2.20275, 0}, {7.1749, 0}, {12.583, 0}, {493.83, 0}};
  EXPECT_LE(testing::spectrum_distance(e1.eigenvalues, e1_ref), 1e-2);
  EXPECT_TRUE(e1.damping_ratios.empty());

  const auto e2 = analyze_saddle(manipulator_form(testing::table_e2()));
  ASSERT_EQ(e2.damping_ratios.size(), 4u);
  for (double z : e2.damping_ratios) {
    EXPECT_GE(z * z, e2.zeta.zeta_min - 1e-9);
    EXPECT_LE(z * z, e2.zeta.zeta_max + 1e-9);
  }
}

// Property suite over random SPD triples.
class RandomTriples : public ::testing::TestWithParam<bool> {};

TEST_P(RandomTriples, TheoryHolds) {
  const bool real_spectrum = GetParam();
  std::mt19937_64 rng(real_spectrum ? 1001 : 1002);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 1 + trial % 5;
    const auto t = testing::random_triple(rng, n, real_spectrum);
    const auto s = form_of(t);
    const Mat X = s.X();
    const Mat Z = s.Z();
    const auto rep = analyze_saddle(s);
    const double slack = 1e-9 * std::max(1.0, s.N.norm());

    // closed right half-plane and band containment
    for (const auto& e : rep.eigenvalues) {
      EXPECT_GE(e.real(), -1e-9);
      if (std::abs(e.imag()) > rep.im_tol) {
        EXPECT_GE(e.real() - rep.bands.complex_re_lo, -slack);
        EXPECT_LE(e.real() - rep.bands.complex_re_hi, slack);
        const double z2 = std::pow(damping_ratio(e), 2);
        EXPECT_GE(z2, rep.zeta.zeta_min - 1e-9);
        EXPECT_LE(z2, rep.zeta.zeta_max + 1e-9);
      } else {
        EXPECT_GE(e.real() - rep.bands.real_lo, -slack);
        EXPECT_LE(e.real() - rep.bands.real_hi, slack);
      }
      // rise-time soundness: the bound is a true lower bound on decay
      EXPECT_GE(e.real(), rep.rise.re_lambda_u - 1e-9);
    }

    if (rep.prop1.satisfied) {
      for (const auto& e : rep.eigenvalues) EXPECT_LE(std::abs(e.imag()), 1e-9);
    }

    for (const auto& pr : eigen_saddle_pairs(s.N)) {
      const CVec v = pr.vector.head(n);
      if (v.norm() < 1e-12) continue;
      const auto [a, b] = rayleigh_pair(X, Z, v);
      const Complex lam = pr.value;
      const double scale = std::max(1.0, std::norm(lam));
      EXPECT_LE(std::abs(lam * lam - a * lam + b), 1e-8 * scale) << "trial " << trial;

      // reality test agrees with the eigensolver away from critical damping
      if (std::abs(a * a - 4 * b) > 1e-6 * a * a) {
        EXPECT_EQ(theorem1_reality_test(X, Z, v), std::abs(lam.imag()) <= 1e-9)
            << "trial " << trial << " lambda " << lam;
      }
    }
  }
}

INSTANTIATE_TEST_SUITE_P(Spectra, RandomTriples, ::testing::Values(true, false));

TEST(Underactuated, MarginIndependentOfKp) {
  Mat K(2, 2);
  K << 2, -1, -1, 1;
  Mat M(2, 2);
  M << 1.5, 0.2, 0.2, 0.8;
  const auto model = linear_model(M, K, Mat::Zero(2, 2), Eigen::Vector2d(1.0, 0.0));
  const Mat Ki = scalar(3.0);
  const auto eq = assign_equilibrium(model, Eigen::Vector2d(0.0, 0.0), Ki);
  const Gains g1{scalar(2.0), Ki, scalar(0.0)};
  const Gains g10{scalar(20.0), Ki, scalar(0.0)};
  const auto r1 = build_rpw(model, g1, eq);
  const auto r10 = build_rpw(model, g10, eq);
  EXPECT_NEAR(linalg::lambda_min(r1.R), 0.0, 1e-14);
  const auto m1 = prop1_check(r1.R, r1.P, r1.W);
  const auto m10 = prop1_check(r10.R, r10.P, r10.W);
  EXPECT_NEAR(m1.margin, m10.margin, 1e-12);
  EXPECT_FALSE(m1.satisfied);
}

}  // namespace
}  // namespace phtune
