#pragma once

// Spectral analysis of the saddle matrix N = [X, Zᵀ; −Z, 0]:
// reality test, eigenvalue bands, the no-overshoot condition, damping-ratio
// bounds, scenario classification and the rise-time bound.
//
// Sign convention: the closed-loop poles are −λ(N). Every quantity here is
// stated for λ(N), whose spectrum lies in the closed right half-plane.

#include <Eigen/Eigenvalues>

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "phtune/saddleform.hpp"

namespace phtune {

enum class Scenario { S1, S2, S3 };

inline const char* to_string(Scenario s) {
  switch (s) {
    case Scenario::S1: return "S1";
    case Scenario::S2: return "S2";
    case Scenario::S3: return "S3";
  }
  return "?";
}

/// Eigenvalues with |λ| below this are marginal and carry no damping ratio.
inline constexpr double kMarginalEigenvalue = 1e-12;

/// Relative factor for the "purely real" test: |Im λ| ≤ factor · max|λ|.
inline constexpr double kImagTolFactor = 1e-7;

struct EigenPair {
  Complex value;
  CVec vector;  // unit 2-norm
};

/// All 2n eigenvalues of N sorted by (Re, Im).
inline std::vector<Complex> eigen_saddle(const Mat& N) {
  if (!linalg::is_square(N)) {
    throw Error(ErrorKind::Shape, "eigen_saddle: matrix is not square");
  }
  if (!N.allFinite()) {
    throw Error(ErrorKind::InvalidArgument, "eigen_saddle: matrix is not finite");
  }
  Eigen::EigenSolver<Mat> es(N, /*computeEigenvectors=*/false);
  if (es.info() != Eigen::Success) {
    throw Error(ErrorKind::Solver, "eigen_saddle: eigensolver did not converge");
  }
  std::vector<Complex> out(es.eigenvalues().data(),
                           es.eigenvalues().data() + es.eigenvalues().size());
  linalg::sort_spectrum(out);
  return out;
}

/// Eigenpairs of N sorted by (Re, Im), eigenvectors normalized.
inline std::vector<EigenPair> eigen_saddle_pairs(const Mat& N) {
  Eigen::EigenSolver<Mat> es(N, /*computeEigenvectors=*/true);
  if (es.info() != Eigen::Success) {
    throw Error(ErrorKind::Solver, "eigen_saddle: eigensolver did not converge");
  }
  std::vector<EigenPair> out;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
    out.push_back({es.eigenvalues()(i), es.eigenvectors().col(i).normalized()});
  }
  std::sort(out.begin(), out.end(), [](const EigenPair& a, const EigenPair& b) {
    return linalg::complex_less(a.value, b.value);
  });
  return out;
}

/// Rayleigh quotients a = v*Xv / v*v and b = v*(ZᵀZ)v / v*v; an eigenvalue
/// of N with leading eigenvector block v solves λ² − aλ + b = 0.
struct RayleighPair {
  double a;
  double b;
};

inline RayleighPair rayleigh_pair(const Mat& X, const Mat& Z, const CVec& v) {
  const double vv = v.squaredNorm();
  if (!(vv > 0.0)) {
    throw Error(ErrorKind::InvalidArgument, "reality test: v must be non-zero");
  }
  const CMat Xc = X.cast<Complex>();
  const CMat ZZ = (Z.transpose() * Z).cast<Complex>();
  const double a = (v.adjoint() * Xc * v)(0, 0).real() / vv;
  const double b = (v.adjoint() * ZZ * v)(0, 0).real() / vv;
  return {a, b};
}

/// λ is real iff (v*Xv / v*v)² ≥ 4 v*(ZᵀZ)v / v*v.
inline bool theorem1_reality_test(const Mat& X, const Mat& Z, const CVec& v) {
  if (X.rows() != v.size() || Z.cols() != v.size()) {
    throw Error(ErrorKind::Shape, "reality test: dimension mismatch");
  }
  const RayleighPair r = rayleigh_pair(X, Z, v);
  return r.a * r.a >= 4.0 * r.b;
}

struct Corollary1Bounds {
  double complex_re_lo;  // ½λ_min(X)
  double complex_re_hi;  // ½λ_max(X)
  double real_lo;        // min{λ_min(X), λ_min(Z X⁻¹ Zᵀ)}
  double real_hi;        // λ_max(X)
  bool advisory = false;  // X singular, real_lo from a pseudo-inverse
};

inline Corollary1Bounds corollary1_bounds(const Mat& X, const Mat& Z) {
  if (!linalg::is_symmetric(X)) {
    throw Error(ErrorKind::InvalidArgument, "corollary1_bounds: X must be symmetric");
  }
  if (Z.cols() != X.rows()) {
    throw Error(ErrorKind::Shape, "corollary1_bounds: Z must have n columns");
  }
  const Vec ex = linalg::sym_eigenvalues(X);
  const double x_min = ex(0);
  const double x_max = ex(ex.size() - 1);

  Corollary1Bounds b;
  b.complex_re_lo = 0.5 * x_min;
  b.complex_re_hi = 0.5 * x_max;
  b.real_hi = x_max;

  Mat schur;
  if (x_min > 1e-12 * std::max(1.0, std::abs(x_max))) {
    schur = Z * X.ldlt().solve(Z.transpose());
  } else {
    schur = Z * linalg::sym_pseudo_inverse(X) * Z.transpose();
    b.advisory = true;
  }
  b.real_lo = std::min(x_min, linalg::lambda_min(schur));
  return b;
}

struct Prop1Result {
  bool satisfied;
  double margin;  // λ_min(R)² − 4λ_max(P)λ_max(W)
};

/// Sufficient condition for a purely real spectrum of N (no overshoot):
/// 4λ_max(P)λ_max(W) ≤ λ_min(R)². Equality is critical damping.
inline Prop1Result prop1_check(const Mat& R, const Mat& P, const Mat& W) {
  const double r = linalg::lambda_min(R);
  const double margin = r * r - 4.0 * linalg::lambda_max(P) * linalg::lambda_max(W);
  return {margin >= 0.0, margin};
}

inline double damping_ratio(const Complex& eig) {
  const double mag = std::abs(eig);
  if (!(mag > 0.0)) {
    throw Error(ErrorKind::UndefinedRatio, "damping ratio of a zero eigenvalue");
  }
  return std::min(1.0, std::abs(eig.real()) / mag);
}

struct ZetaBounds {
  double zeta_min;  // lower bound on ζ²
  double zeta_max;  // upper bound on ζ²
};

/// Bounds on the squared damping ratio of every eigenvalue of N:
///   ζ_min = max{0, ¼λ_min(R)² / (λ_max(W)λ_max(P))}
///   ζ_max = min{1, ¼λ_max(R)² / (λ_min(W)λ_min(P))}
inline ZetaBounds zeta_bounds(const Mat& R, const Mat& P, const Mat& W) {
  const Vec ep = linalg::sym_eigenvalues(P);
  const Vec ew = linalg::sym_eigenvalues(W);
  if (!(ep(0) > 0.0) || !(ew(0) > 0.0)) {
    throw Error(ErrorKind::InvalidArgument,
                "zeta_bounds: P and W must be positive definite");
  }
  const Vec er = linalg::sym_eigenvalues(R);
  const double r_min = er(0);
  const double r_max = er(er.size() - 1);
  const double p_max = ep(ep.size() - 1);
  const double w_max = ew(ew.size() - 1);
  ZetaBounds z;
  z.zeta_min = std::max(0.0, 0.25 * r_min * r_min / (w_max * p_max));
  z.zeta_max = std::min(1.0, 0.25 * r_max * r_max / (ew(0) * ep(0)));
  return z;
}

inline double default_im_tol(const std::vector<Complex>& eigs) {
  double mag = 0.0;
  for (const auto& e : eigs) mag = std::max(mag, std::abs(e));
  return kImagTolFactor * mag;
}

inline Scenario classify_scenario(const std::vector<Complex>& eigs, double im_tol) {
  if (eigs.empty()) {
    throw Error(ErrorKind::InvalidArgument, "classify_scenario: empty spectrum");
  }
  std::size_t real_count = 0;
  for (const auto& e : eigs) real_count += std::abs(e.imag()) <= im_tol ? 1 : 0;
  if (real_count == eigs.size()) return Scenario::S1;
  if (real_count == 0) return Scenario::S2;
  return Scenario::S3;
}

inline Scenario classify_scenario(const std::vector<Complex>& eigs) {
  return classify_scenario(eigs, default_im_tol(eigs));
}

struct RiseTimeBound {
  double re_lambda_u;  // lower bound on Re λ(N), 1/s
  double t_ru;         // 4 / re_lambda_u, s
  double wr_min;       // λ_min(W⁻¹R)
  double rp_min;       // λ_min(R⁻¹P), or its conservative substitute
  bool advisory = false;  // R singular; rp_min = λ_min(P)/λ_max(R)
};

/// Upper bound on the 98 % rise time, t_ru = 4 / Re(λ_u), with
///   S1: Re(λ_u) = min{λ_min(W⁻¹R), λ_min(R⁻¹P)}
///   S2: Re(λ_u) = ½λ_min(W⁻¹R)
///   S3: Re(λ_u) = min{½λ_min(W⁻¹R), λ_min(R⁻¹P)}
/// exp(−4) ≈ 0.0183 is the residual fraction at t_ru.
inline RiseTimeBound rise_time_bound(const Mat& R, const Mat& P, const Mat& W,
                                     Scenario scenario) {
  RiseTimeBound out;
  out.wr_min = std::max(0.0, linalg::pencil_lambda_min(R, W));

  const Vec er = linalg::sym_eigenvalues(R);
  const double r_max = er(er.size() - 1);
  const bool r_singular = !(er(0) > 1e-12 * std::max(1.0, r_max));
  if (scenario != Scenario::S2) {
    if (r_singular) {
      out.rp_min = r_max > 0.0 ? linalg::lambda_min(P) / r_max
                               : std::numeric_limits<double>::infinity();
      out.advisory = true;
    } else {
      out.rp_min = linalg::pencil_lambda_min(P, R);
    }
  } else {
    out.rp_min = r_singular ? std::numeric_limits<double>::quiet_NaN()
                            : linalg::pencil_lambda_min(P, R);
  }

  switch (scenario) {
    case Scenario::S1: out.re_lambda_u = std::min(out.wr_min, out.rp_min); break;
    case Scenario::S2: out.re_lambda_u = 0.5 * out.wr_min; break;
    case Scenario::S3: out.re_lambda_u = std::min(0.5 * out.wr_min, out.rp_min); break;
  }
  out.t_ru = out.re_lambda_u > 0.0 ? 4.0 / out.re_lambda_u
                                   : std::numeric_limits<double>::infinity();
  return out;
}

struct SpectralReport {
  std::vector<Complex> eigenvalues;  // λ(N), sorted
  std::vector<double> damping_ratios;  // complex-pair members only
  int marginal_count = 0;
  double im_tol = 0.0;
  Scenario scenario = Scenario::S1;
  Prop1Result prop1{false, 0.0};
  ZetaBounds zeta{0.0, 1.0};
  Corollary1Bounds bands{};
  RiseTimeBound rise{};
};

inline SpectralReport analyze_saddle(const SaddleForm& s) {
  SpectralReport rep;
  rep.eigenvalues = eigen_saddle(s.N);
  rep.im_tol = default_im_tol(rep.eigenvalues);
  rep.scenario = classify_scenario(rep.eigenvalues, rep.im_tol);
  for (const auto& e : rep.eigenvalues) {
    if (std::abs(e) < kMarginalEigenvalue) {
      ++rep.marginal_count;
      continue;
    }
    if (std::abs(e.imag()) > rep.im_tol) rep.damping_ratios.push_back(damping_ratio(e));
  }
  rep.prop1 = prop1_check(s.R, s.P, s.W);
  rep.zeta = zeta_bounds(s.R, s.P, s.W);
  rep.bands = corollary1_bounds(s.X(), s.Z());
  rep.rise = rise_time_bound(s.R, s.P, s.W, rep.scenario);
  return rep;
}

}  // namespace phtune
