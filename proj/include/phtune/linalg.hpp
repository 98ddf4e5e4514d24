#pragma once

// Small dense linear-algebra helpers shared by the saddle-form and spectral
// code. Everything here works on Eigen dynamic matrices; the systems of
// interest are a handful of degrees of freedom.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "phtune/errors.hpp"

namespace phtune {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using Complex = std::complex<double>;
using CVec = Eigen::VectorXcd;
using CMat = Eigen::MatrixXcd;

namespace linalg {

inline bool is_square(const Mat& A) { return A.rows() == A.cols(); }

/// Symmetry up to a tolerance relative to the largest entry.
inline bool is_symmetric(const Mat& A, double rel_tol = 1e-10) {
  if (!is_square(A)) return false;
  const double scale = std::max(1.0, A.cwiseAbs().maxCoeff());
  return (A - A.transpose()).cwiseAbs().maxCoeff() <= rel_tol * scale;
}

inline Mat symmetrize(const Mat& A) { return 0.5 * (A + A.transpose()); }

/// Ascending eigenvalues of a symmetric matrix.
inline Vec sym_eigenvalues(const Mat& A) {
  if (A.size() == 0) return Vec();
  Eigen::SelfAdjointEigenSolver<Mat> es(symmetrize(A), Eigen::EigenvaluesOnly);
  return es.eigenvalues();
}

inline double lambda_min(const Mat& A) { return sym_eigenvalues(A)(0); }

inline double lambda_max(const Mat& A) {
  const Vec ev = sym_eigenvalues(A);
  return ev(ev.size() - 1);
}

inline bool is_positive_definite(const Mat& A) {
  return is_symmetric(A) && A.rows() > 0 && lambda_min(A) > 0.0;
}

/// Positive semi-definite up to a small negative slack relative to the scale
/// of A (rounding in assembled sums such as D + G K Gᵀ).
inline bool is_positive_semidefinite(const Mat& A, double rel_tol = 1e-12) {
  if (!is_symmetric(A)) return false;
  if (A.rows() == 0) return true;
  const Vec ev = sym_eigenvalues(A);
  const double scale = std::max(1.0, ev.cwiseAbs().maxCoeff());
  return ev(0) >= -rel_tol * scale;
}

/// Upper-triangular Cholesky factor U with UᵀU = A.
///
/// Plain column-oriented Cholesky–Banachiewicz on the upper triangle. Throws
/// DecompositionError naming the first pivot that is not strictly positive.
inline Mat cholesky_upper(const Mat& A) {
  if (!is_square(A)) {
    throw Error(ErrorKind::Shape, "cholesky: matrix is not square");
  }
  if (!is_symmetric(A)) {
    throw DecompositionError(-1, "cholesky: matrix is not symmetric");
  }
  const Eigen::Index n = A.rows();
  Mat U = Mat::Zero(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    double pivot = A(j, j);
    for (Eigen::Index k = 0; k < j; ++k) pivot -= U(k, j) * U(k, j);
    if (!(pivot > 0.0) || !std::isfinite(pivot)) {
      std::ostringstream os;
      os << "cholesky: non-positive pivot " << pivot << " at index " << j;
      throw DecompositionError(static_cast<int>(j), os.str());
    }
    const double ujj = std::sqrt(pivot);
    U(j, j) = ujj;
    for (Eigen::Index i = j + 1; i < n; ++i) {
      double s = A(j, i);
      for (Eigen::Index k = 0; k < j; ++k) s -= U(k, j) * U(k, i);
      U(j, i) = s / ujj;
    }
  }
  return U;
}

inline Mat upper_triangular_inverse(const Mat& U) {
  return U.triangularView<Eigen::Upper>().solve(
      Mat::Identity(U.rows(), U.cols()));
}

/// Ascending eigenvalues of the symmetric-definite pencil B x = λ A x, i.e.
/// the spectrum of A⁻¹B, with A positive definite. Reduced through the
/// Cholesky factor of A so no inverse is formed.
inline Vec pencil_eigenvalues(const Mat& B, const Mat& A) {
  const Mat U = cholesky_upper(A);
  // C = U⁻ᵀ B U⁻¹
  const Mat Y = U.transpose().triangularView<Eigen::Lower>().solve(B);
  const Mat C =
      U.transpose().triangularView<Eigen::Lower>().solve(Y.transpose());
  return sym_eigenvalues(symmetrize(C));
}

/// λ_min(A⁻¹B) for A positive definite and B symmetric.
inline double pencil_lambda_min(const Mat& B, const Mat& A) {
  return pencil_eigenvalues(B, A)(0);
}

/// Moore–Penrose pseudo-inverse of a symmetric matrix via its eigen
/// decomposition; eigenvalues below `rel_cut`·λ_max are treated as zero.
inline Mat sym_pseudo_inverse(const Mat& A, double rel_cut = 1e-12) {
  Eigen::SelfAdjointEigenSolver<Mat> es(symmetrize(A));
  const Vec& ev = es.eigenvalues();
  const double cut = rel_cut * std::max(ev.cwiseAbs().maxCoeff(), 1e-300);
  Vec inv = Vec::Zero(ev.size());
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    if (std::abs(ev(i)) > cut) inv(i) = 1.0 / ev(i);
  }
  return es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().transpose();
}

inline Mat block_diag(const Mat& A, const Mat& B) {
  Mat out = Mat::Zero(A.rows() + B.rows(), A.cols() + B.cols());
  out.topLeftCorner(A.rows(), A.cols()) = A;
  out.bottomRightCorner(B.rows(), B.cols()) = B;
  return out;
}

/// Lexicographic (real, imag) ordering used for every reported spectrum.
inline bool complex_less(const Complex& a, const Complex& b) {
  if (a.real() != b.real()) return a.real() < b.real();
  return a.imag() < b.imag();
}

inline void sort_spectrum(std::vector<Complex>& values) {
  std::sort(values.begin(), values.end(), complex_less);
}

/// Relative Frobenius residual ‖A − B‖_F / max(‖B‖_F, tiny).
inline double rel_frobenius(const Mat& A, const Mat& B) {
  return (A - B).norm() / std::max(B.norm(), 1e-300);
}

}  // namespace linalg
}  // namespace phtune
