#pragma once

// Linearized PID-PBC closed loop and its saddle-point form.
//
// With R = D⋆ + G Kp Gᵀ, P = ∇²V⋆ + G Ki Gᵀ, W = M⋆ + G Kd Gᵀ and Cholesky
// factors φ_Pᵀφ_P = P, φ_Wᵀφ_W = W⁻¹, the linearization ẋ = A x is similar
// to ż = −N z with
//
//   N = [ φ_W R φ_Wᵀ   φ_W φ_Pᵀ ]
//       [ −φ_P φ_Wᵀ        0    ]
//
// through z = T x, T = [0, φ_W⁻ᵀ M⋆⁻¹; φ_P, 0].

#include <sstream>

#include "phtune/model.hpp"

namespace phtune {

struct Gains {
  Mat Kp;
  Mat Ki;
  Mat Kd;

  static Gains diagonal(const Vec& kp, const Vec& ki, const Vec& kd) {
    return {kp.asDiagonal(), ki.asDiagonal(), kd.asDiagonal()};
  }

  int m() const { return static_cast<int>(Kp.rows()); }

  /// Kp, Ki symmetric positive definite and Kd symmetric positive
  /// semi-definite, all m × m.
  void validate(int m) const {
    auto square = [m](const Mat& K) { return K.rows() == m && K.cols() == m; };
    if (!square(Kp) || !square(Ki) || !square(Kd)) {
      std::ostringstream os;
      os << "gains must be " << m << " x " << m;
      throw Error(ErrorKind::Shape, os.str());
    }
    if (!linalg::is_positive_definite(Kp)) {
      throw Error(ErrorKind::InvalidArgument, "Kp must be symmetric positive definite");
    }
    if (!linalg::is_positive_definite(Ki)) {
      throw Error(ErrorKind::InvalidArgument, "Ki must be symmetric positive definite");
    }
    if (!linalg::is_positive_semidefinite(Kd)) {
      throw Error(ErrorKind::InvalidArgument,
                  "Kd must be symmetric positive semi-definite");
    }
  }
};

struct RPW {
  Mat R;  // damping injection
  Mat P;  // stiffness
  Mat W;  // inertia
};

struct CholeskyFactors {
  Mat phiP;  // upper triangular, φ_Pᵀφ_P = P
  Mat phiW;  // lower triangular, φ_Wᵀφ_W = W⁻¹
};

struct SaddleForm {
  Mat R, P, W;
  Mat phiP, phiW;
  Mat N;
  Mat T;

  /// Upper-left block φ_W R φ_Wᵀ.
  Mat X() const {
    const auto n = R.rows();
    return N.topLeftCorner(n, n);
  }
  /// Coupling block φ_P φ_Wᵀ.
  Mat Z() const {
    const auto n = R.rows();
    return -N.bottomLeftCorner(n, n);
  }
};

inline Vec rest_momentum(const MechanicalModel& model) {
  return Vec::Zero(model.n);
}

/// Evaluates R, P, W at (q⋆, 0). Throws AssumptionError when P is not
/// positive definite, i.e. the shaped energy has no isolated minimum.
inline RPW build_rpw(const MechanicalModel& model, const Gains& gains,
                     const Equilibrium& eq) {
  gains.validate(model.m);
  const Mat& G = model.input_matrix;
  const Vec& q = eq.q_star;
  RPW out;
  out.R = linalg::symmetrize(model.damping(q, rest_momentum(model)) +
                             G * gains.Kp * G.transpose());
  out.P = linalg::symmetrize(model.potential_hess(q) +
                             G * gains.Ki * G.transpose());
  out.W = linalg::symmetrize(model.mass(q) + G * gains.Kd * G.transpose());

  const double p_min = linalg::lambda_min(out.P);
  if (!(p_min > 0.0)) {
    std::ostringstream os;
    os << "shaped energy has no isolated minimum at q_star: lambda_min(P) = "
       << p_min;
    throw AssumptionError(p_min, os.str());
  }
  const double w_min = linalg::lambda_min(out.W);
  if (!(w_min > 0.0)) {
    std::ostringstream os;
    os << "inertia term W is not positive definite: lambda_min(W) = " << w_min;
    throw AssumptionError(w_min, os.str());
  }
  return out;
}

/// φ_P is the upper Cholesky factor of P. φ_W is U_W⁻ᵀ where U_WᵀU_W = W, so
/// that φ_Wᵀφ_W = W⁻¹ without forming W⁻¹.
inline CholeskyFactors cholesky_factors(const Mat& P, const Mat& W) {
  CholeskyFactors f;
  f.phiP = linalg::cholesky_upper(P);
  const Mat UW = linalg::cholesky_upper(W);
  f.phiW = linalg::upper_triangular_inverse(UW).transpose();
  return f;
}

inline Mat build_saddle_matrix(const Mat& R, const Mat& phiP, const Mat& phiW) {
  const auto n = R.rows();
  if (!linalg::is_square(R) || phiP.rows() != n || phiP.cols() != n ||
      phiW.rows() != n || phiW.cols() != n) {
    throw Error(ErrorKind::Shape, "build_saddle_matrix: blocks must all be n x n");
  }
  Mat N = Mat::Zero(2 * n, 2 * n);
  N.topLeftCorner(n, n) = linalg::symmetrize(phiW * R * phiW.transpose());
  N.topRightCorner(n, n) = phiW * phiP.transpose();
  N.bottomLeftCorner(n, n) = -phiP * phiW.transpose();
  return N;
}

inline SaddleForm make_saddle_form(const MechanicalModel& model,
                                   const Gains& gains, const Equilibrium& eq) {
  const RPW rpw = build_rpw(model, gains, eq);
  const CholeskyFactors f = cholesky_factors(rpw.P, rpw.W);
  SaddleForm s;
  s.R = rpw.R;
  s.P = rpw.P;
  s.W = rpw.W;
  s.phiP = f.phiP;
  s.phiW = f.phiW;
  s.N = build_saddle_matrix(s.R, s.phiP, s.phiW);

  const auto n = s.R.rows();
  const Mat M = model.mass(eq.q_star);
  // φ_W⁻ᵀ = U_W
  const Mat UW = linalg::cholesky_upper(s.W);
  s.T = Mat::Zero(2 * n, 2 * n);
  s.T.topRightCorner(n, n) = UW * M.inverse();
  s.T.bottomLeftCorner(n, n) = s.phiP;
  return s;
}

/// H_d = H + ½‖Gᵀq + κ‖²_Ki + ½‖y‖²_Kd with y = GᵀM⁻¹(q)p.
inline double desired_hamiltonian(const MechanicalModel& model,
                                  const Gains& gains, const Equilibrium& eq,
                                  const Vec& q, const Vec& p) {
  const Mat& G = model.input_matrix;
  const Vec e = G.transpose() * q + eq.kappa;
  const Vec y = G.transpose() * model.mass(q).ldlt().solve(p);
  return model.hamiltonian(q, p) + 0.5 * e.dot(gains.Ki * e) +
         0.5 * y.dot(gains.Kd * y);
}

/// ∇²H_d at (q⋆, 0): blockdiag(P, M⋆⁻¹ W M⋆⁻¹). The q–p cross blocks vanish
/// because every p-dependent term is quadratic in p.
inline Mat hessian_hd(const MechanicalModel& model, const Gains& gains,
                      const Equilibrium& eq) {
  const Mat& G = model.input_matrix;
  const Mat M = model.mass(eq.q_star);
  const Mat P = model.potential_hess(eq.q_star) + G * gains.Ki * G.transpose();
  const Mat W = M + G * gains.Kd * G.transpose();
  const auto Mldlt = M.ldlt();
  const Mat MinvW = Mldlt.solve(W);
  const Mat pp = Mldlt.solve(MinvW.transpose()).transpose();
  return linalg::block_diag(linalg::symmetrize(P), linalg::symmetrize(pp));
}

/// A_lin = Υ⋆⁻¹ F⋆ Υ⋆⁻ᵀ ∇²H_d⋆ for the perturbation (q − q⋆, p).
inline Mat linearize_closed_loop(const MechanicalModel& model,
                                 const Gains& gains, const Equilibrium& eq) {
  gains.validate(model.m);
  const int n = model.n;
  const Mat& G = model.input_matrix;
  const Mat M = model.mass(eq.q_star);
  const Mat Minv = M.inverse();

  // ∇_q y = ∇_q(GᵀM⁻¹(q)p) vanishes at p = 0, which leaves the lower-left
  // block of Υ⋆ empty.
  Mat upsilon = Mat::Identity(2 * n, 2 * n);
  upsilon.bottomRightCorner(n, n) += G * gains.Kd * G.transpose() * Minv;

  Mat F = Mat::Zero(2 * n, 2 * n);
  F.topRightCorner(n, n) = Mat::Identity(n, n);
  F.bottomLeftCorner(n, n) = -Mat::Identity(n, n);
  F.bottomRightCorner(n, n) = -(model.damping(eq.q_star, rest_momentum(model)) +
                                G * gains.Kp * G.transpose());

  const Eigen::FullPivLU<Mat> lu(upsilon);
  if (!lu.isInvertible()) {
    throw Error(ErrorKind::NumericalSingularity,
                "linearize_closed_loop: Upsilon is singular at q_star");
  }
  const Mat up_inv = lu.inverse();
  return up_inv * F * up_inv.transpose() * hessian_hd(model, gains, eq);
}

}  // namespace phtune
