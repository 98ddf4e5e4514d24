#pragma once

// Mechanical port-Hamiltonian plants
//
//   q̇ = ∂H/∂p,  ṗ = −∂H/∂q − D(q,p) ∂H/∂p + G u,   H = ½ pᵀM⁻¹(q)p + V(q)
//
// described by point-evaluatable callables with analytic derivatives.

#include <cmath>
#include <functional>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <utility>

#include "phtune/linalg.hpp"

namespace phtune {

/// Absolute ∞-norm tolerance on G⊥∇V(q⋆) for equilibrium membership.
inline constexpr double kDefaultEquilibriumTol = 1e-8;

/// Step used for finite-difference ∂M/∂qₖ when a model has no analytic one.
inline constexpr double kMassFiniteDifferenceStep = 1e-6;

struct MechanicalModel {
  std::string name;
  int n = 0;  // configuration dimension
  int m = 0;  // input dimension

  std::function<Mat(const Vec& q)> mass;
  std::function<double(const Vec& q)> potential;
  std::function<Vec(const Vec& q)> potential_grad;
  std::function<Mat(const Vec& q)> potential_hess;
  std::function<Mat(const Vec& q, const Vec& p)> damping;
  Mat input_matrix;

  /// Optional analytic ∂M/∂qₖ. Left empty, central differences are used.
  std::function<Mat(const Vec& q, int k)> mass_partial;

  Mat mass_derivative(const Vec& q, int k) const {
    if (mass_partial) return mass_partial(q, k);
    const double h = kMassFiniteDifferenceStep;
    Vec qp = q, qm = q;
    qp(k) += h;
    qm(k) -= h;
    return (mass(qp) - mass(qm)) / (2.0 * h);
  }

  /// Ṁ = Σₖ ∂M/∂qₖ q̇ₖ.
  Mat mass_rate(const Vec& q, const Vec& qdot) const {
    Mat out = Mat::Zero(n, n);
    for (int k = 0; k < n; ++k) {
      if (qdot(k) != 0.0) out += mass_derivative(q, k) * qdot(k);
    }
    return out;
  }

  double hamiltonian(const Vec& q, const Vec& p) const {
    return 0.5 * p.dot(mass(q).ldlt().solve(p)) + potential(q);
  }

  /// ∇_q H = −½ [q̇ᵀ ∂M/∂qₖ q̇]ₖ + ∇V with q̇ = M⁻¹p.
  Vec hamiltonian_grad_q(const Vec& q, const Vec& p) const {
    const Vec qdot = mass(q).ldlt().solve(p);
    Vec g = potential_grad(q);
    for (int k = 0; k < n; ++k) {
      g(k) -= 0.5 * qdot.dot(mass_derivative(q, k) * qdot);
    }
    return g;
  }
};

/// Checks the structural invariants of `model` at (q, p): dimensions, rank of
/// G, M(q) symmetric positive definite, D(q,p) symmetric positive
/// semi-definite. Throws on the first violation.
inline void check_model_at(const MechanicalModel& model, const Vec& q,
                           const Vec& p) {
  if (q.size() != model.n || p.size() != model.n) {
    throw Error(ErrorKind::Shape, "model '" + model.name +
                                      "': state dimension mismatch");
  }
  const Mat M = model.mass(q);
  if (M.rows() != model.n || !linalg::is_positive_definite(M)) {
    throw Error(ErrorKind::InvalidParameter,
                "model '" + model.name + "': mass matrix not SPD");
  }
  const Mat D = model.damping(q, p);
  if (D.rows() != model.n || !linalg::is_positive_semidefinite(D)) {
    throw Error(ErrorKind::InvalidParameter,
                "model '" + model.name + "': damping matrix not PSD");
  }
}

inline int numerical_rank(const Mat& A) {
  if (A.size() == 0) return 0;
  Eigen::JacobiSVD<Mat> svd(A);
  const Vec& s = svd.singularValues();
  const double tol = static_cast<double>(std::max(A.rows(), A.cols())) *
                     std::numeric_limits<double>::epsilon() * s(0);
  int rank = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i) rank += s(i) > tol ? 1 : 0;
  return rank;
}

inline void check_input_matrix(const Mat& G, int n, int m) {
  if (G.rows() != n || G.cols() != m || m > n || m < 1) {
    std::ostringstream os;
    os << "input matrix must be n x m with 1 <= m <= n, got " << G.rows()
       << " x " << G.cols();
    throw Error(ErrorKind::Shape, os.str());
  }
  if (numerical_rank(G) != m) {
    throw Error(ErrorKind::Rank, "input matrix G is rank deficient");
  }
}

/// Full-row-rank G⊥ with G⊥G = 0, spanning the left null space of G. Empty
/// (0 × n) when G is square.
inline Mat left_annihilator(const Mat& G) {
  const auto n = G.rows();
  const auto m = G.cols();
  if (m > n) {
    throw Error(ErrorKind::Shape, "left_annihilator: G has more columns than rows");
  }
  if (numerical_rank(G) != m) {
    throw Error(ErrorKind::Rank, "left_annihilator: G is rank deficient");
  }
  if (m == n) return Mat(0, n);
  Eigen::JacobiSVD<Mat> svd(G, Eigen::ComputeFullU);
  return svd.matrixU().rightCols(n - m).transpose();
}

/// Two-link planar manipulator: V ≡ 0, G = I₂, constant viscous damping
/// diag(0.07, 0.03), and the cosine-coupled inertia
///   M(q) = [a₁+a₂+2b cos q₂, a₂+b cos q₂; a₂+b cos q₂, a₂].
inline MechanicalModel builtin_manipulator() {
  static constexpr double a1 = 0.1476;
  static constexpr double a2 = 0.0725;
  static constexpr double b = 0.0858;
  MechanicalModel model;
  model.name = "manipulator2dof";
  model.n = 2;
  model.m = 2;
  model.mass = [](const Vec& q) {
    const double c = std::cos(q(1));
    Mat M(2, 2);
    M << a1 + a2 + 2.0 * b * c, a2 + b * c,
         a2 + b * c, a2;
    return M;
  };
  model.mass_partial = [](const Vec& q, int k) -> Mat {
    if (k == 0) return Mat::Zero(2, 2);
    const double s = -b * std::sin(q(1));
    Mat dM(2, 2);
    dM << 2.0 * s, s,
          s, 0.0;
    return dM;
  };
  model.potential = [](const Vec&) { return 0.0; };
  model.potential_grad = [](const Vec&) -> Vec { return Vec::Zero(2); };
  model.potential_hess = [](const Vec&) -> Mat { return Mat::Zero(2, 2); };
  model.damping = [](const Vec&, const Vec&) -> Mat {
    return Eigen::Vector2d(0.07, 0.03).asDiagonal().toDenseMatrix();
  };
  model.input_matrix = Mat::Identity(2, 2);
  return model;
}

/// Single pendulum, angle measured from the downward rest position.
inline MechanicalModel builtin_pendulum(double mass_kg, double length_m,
                                        double gravity,
                                        double viscous_damping) {
  if (!(mass_kg > 0.0) || !(length_m > 0.0) || !(gravity > 0.0)) {
    throw Error(ErrorKind::InvalidParameter,
                "pendulum: mass, length and gravity must be positive");
  }
  if (!(viscous_damping >= 0.0)) {
    throw Error(ErrorKind::InvalidParameter,
                "pendulum: viscous damping must be non-negative");
  }
  const double inertia = mass_kg * length_m * length_m;
  const double mgl = mass_kg * gravity * length_m;
  MechanicalModel model;
  model.name = "pendulum";
  model.n = 1;
  model.m = 1;
  model.mass = [inertia](const Vec&) { return Mat::Constant(1, 1, inertia); };
  model.mass_partial = [](const Vec&, int) -> Mat { return Mat::Zero(1, 1); };
  model.potential = [mgl](const Vec& q) { return mgl * (1.0 - std::cos(q(0))); };
  model.potential_grad = [mgl](const Vec& q) -> Vec {
    return Vec::Constant(1, mgl * std::sin(q(0)));
  };
  model.potential_hess = [mgl](const Vec& q) -> Mat {
    return Mat::Constant(1, 1, mgl * std::cos(q(0)));
  };
  model.damping = [viscous_damping](const Vec&, const Vec&) -> Mat {
    return Mat::Constant(1, 1, viscous_damping);
  };
  model.input_matrix = Mat::Identity(1, 1);
  return model;
}

/// Constant-coefficient plant: M constant, V(q) = ½ qᵀKq, D constant.
inline MechanicalModel linear_model(const Mat& mass, const Mat& stiffness,
                                    const Mat& damping, const Mat& input,
                                    std::string name = "linear") {
  const int n = static_cast<int>(mass.rows());
  if (!linalg::is_square(mass) || stiffness.rows() != n ||
      stiffness.cols() != n || damping.rows() != n || damping.cols() != n) {
    throw Error(ErrorKind::Shape, "linear model: M, K, D must be n x n");
  }
  if (!linalg::is_positive_definite(mass)) {
    throw Error(ErrorKind::InvalidParameter, "linear model: M must be SPD");
  }
  if (!linalg::is_symmetric(stiffness)) {
    throw Error(ErrorKind::InvalidParameter, "linear model: K must be symmetric");
  }
  if (!linalg::is_positive_semidefinite(damping)) {
    throw Error(ErrorKind::InvalidParameter, "linear model: D must be PSD");
  }
  check_input_matrix(input, n, static_cast<int>(input.cols()));

  MechanicalModel model;
  model.name = std::move(name);
  model.n = n;
  model.m = static_cast<int>(input.cols());
  model.mass = [mass](const Vec&) { return mass; };
  model.mass_partial = [n](const Vec&, int) -> Mat { return Mat::Zero(n, n); };
  model.potential = [stiffness](const Vec& q) { return 0.5 * q.dot(stiffness * q); };
  model.potential_grad = [stiffness](const Vec& q) -> Vec { return stiffness * q; };
  model.potential_hess = [stiffness](const Vec&) -> Mat { return stiffness; };
  model.damping = [damping](const Vec&, const Vec&) -> Mat { return damping; };
  model.input_matrix = input;
  return model;
}

struct Equilibrium {
  Vec q_star;
  Vec kappa;
  Vec u_star;  // G u⋆ = ∇V(q⋆)
};

/// Computes the integral offset κ that places the closed-loop rest point at
/// (q⋆, 0). Rejects q⋆ outside the assignable set, i.e. ‖G⊥∇V(q⋆)‖∞ > tol.
inline Equilibrium assign_equilibrium(const MechanicalModel& model,
                                      const Vec& q_star, const Mat& Ki,
                                      double tol_eq = kDefaultEquilibriumTol) {
  if (q_star.size() != model.n) {
    throw Error(ErrorKind::Shape, "assign_equilibrium: q_star has wrong size");
  }
  if (Ki.rows() != model.m || Ki.cols() != model.m ||
      !linalg::is_positive_definite(Ki)) {
    throw Error(ErrorKind::InvalidArgument,
                "assign_equilibrium: Ki must be m x m positive definite");
  }
  const Mat& G = model.input_matrix;
  const Vec grad = model.potential_grad(q_star);
  const Mat Gperp = left_annihilator(G);
  if (Gperp.rows() > 0) {
    const double residual = (Gperp * grad).cwiseAbs().maxCoeff();
    if (residual > tol_eq) {
      std::ostringstream os;
      os << "q_star is not an assignable equilibrium: |G_perp grad V|_inf = "
         << residual << " > " << tol_eq;
      throw Error(ErrorKind::UnassignableEquilibrium, os.str());
    }
  }
  Equilibrium eq;
  eq.q_star = q_star;
  eq.u_star = G.colPivHouseholderQr().solve(grad);
  eq.kappa = -G.transpose() * q_star - Ki.ldlt().solve(eq.u_star);
  return eq;
}

}  // namespace phtune
