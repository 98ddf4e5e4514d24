#pragma once

// Closed-loop simulation under the PID-PBC law
//
//   u = −Kp y − Ki(Gᵀq + κ) − Kd ẏ,   y = GᵀM⁻¹(q)p,
//
// and transient-response metrics.

#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "phtune/saddleform.hpp"

namespace phtune {

inline constexpr double kDefaultTimeStep = 1e-3;
inline constexpr double kDefaultRiseBand = 0.98;

/// Control input with the derivative action resolved exactly.
///
/// ẏ = Gᵀ(−M⁻¹ṀM⁻¹p + M⁻¹ṗ) and ṗ = f₀ + Gu, f₀ = −∇_qH − DM⁻¹p. Collecting
/// the u terms gives Ψ(q)u = −Kp y − Ki(Gᵀq+κ) − Kd Gᵀ(M⁻¹f₀ − M⁻¹Ṁq̇) with
/// Ψ(q) = I + Kd GᵀM⁻¹G, non-singular for Kd ⪰ 0.
inline Vec control_input(const MechanicalModel& model, const Gains& gains,
                         const Equilibrium& eq, const Vec& q, const Vec& p) {
  const Mat& G = model.input_matrix;
  const Mat M = model.mass(q);
  const auto Mldlt = M.ldlt();
  const Vec qdot = Mldlt.solve(p);
  const Vec y = G.transpose() * qdot;
  Vec rhs = -gains.Kp * y - gains.Ki * (G.transpose() * q + eq.kappa);
  if (gains.Kd.isZero(0.0)) return rhs;

  const Vec f0 = -model.hamiltonian_grad_q(q, p) - model.damping(q, p) * qdot;
  const Vec drift = Mldlt.solve(f0 - model.mass_rate(q, qdot) * qdot);
  rhs -= gains.Kd * (G.transpose() * drift);
  const Mat psi = Mat::Identity(model.m, model.m) + gains.Kd * G.transpose() * Mldlt.solve(G);
  return psi.partialPivLu().solve(rhs);
}

/// Closed-loop vector field on x = (q, p).
inline Vec closed_loop_field(const MechanicalModel& model, const Gains& gains,
                             const Equilibrium& eq, const Vec& x, Vec* u_out = nullptr) {
  const int n = model.n;
  const Vec q = x.head(n);
  const Vec p = x.tail(n);
  const Vec u = control_input(model, gains, eq, q, p);
  const Vec qdot = model.mass(q).ldlt().solve(p);
  Vec dx(2 * n);
  dx.head(n) = qdot;
  dx.tail(n) = -model.hamiltonian_grad_q(q, p) - model.damping(q, p) * qdot +
               model.input_matrix * u;
  if (u_out) *u_out = u;
  return dx;
}

template <typename Field>
Vec rk4_step(Field&& f, const Vec& x, double dt) {
  const Vec k1 = f(x);
  const Vec k2 = f(x + 0.5 * dt * k1);
  const Vec k3 = f(x + 0.5 * dt * k2);
  const Vec k4 = f(x + dt * k3);
  return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

struct Trajectory {
  std::vector<double> t;
  std::vector<Vec> q;
  std::vector<Vec> p;
  std::vector<Vec> u;
  std::vector<double> hd;

  std::size_t size() const { return t.size(); }
  Vec state(std::size_t k) const {
    Vec x(q[k].size() + p[k].size());
    x << q[k], p[k];
    return x;
  }
  Vec final_state() const { return state(size() - 1); }
};

struct SimulationOptions {
  /// Re-run with dt/2 and store the relative change of the final state.
  bool check_convergence = false;
};

struct NonlinearRun {
  Trajectory trajectory;
  double convergence_delta = std::numeric_limits<double>::quiet_NaN();
};

namespace detail {

inline long step_count(double dt, double T) {
  if (!(dt > 0.0) || !(T >= dt)) {
    throw Error(ErrorKind::InvalidArgument, "simulation needs dt > 0 and T >= dt");
  }
  return std::lround(T / dt);
}

inline Trajectory integrate_nonlinear(const MechanicalModel& model, const Gains& gains,
                                      const Equilibrium& eq, const Vec& x0, double dt,
                                      double T) {
  const int n = model.n;
  if (x0.size() != 2 * n) {
    throw Error(ErrorKind::Shape, "simulate_nonlinear: x0 must have 2n entries");
  }
  const long steps = step_count(dt, T);
  Trajectory tr;
  tr.t.reserve(steps + 1);
  const auto field = [&](const Vec& x) { return closed_loop_field(model, gains, eq, x); };
  const auto record = [&](long k, const Vec& x) {
    const Vec q = x.head(n);
    const Vec p = x.tail(n);
    tr.t.push_back(static_cast<double>(k) * dt);
    tr.q.push_back(q);
    tr.p.push_back(p);
    tr.u.push_back(control_input(model, gains, eq, q, p));
    tr.hd.push_back(desired_hamiltonian(model, gains, eq, q, p));
  };
  Vec x = x0;
  record(0, x);
  for (long k = 1; k <= steps; ++k) {
    x = rk4_step(field, x, dt);
    if (!x.allFinite()) {
      std::ostringstream os;
      os << "closed loop diverged at step " << k << " (t = " << k * dt << " s)";
      throw DivergenceError(k, os.str());
    }
    record(k, x);
  }
  return tr;
}

}  // namespace detail

/// Fixed-step RK4 integration of the nonlinear closed loop on the grid
/// t_k = k·dt, k = 0 … round(T/dt).
inline NonlinearRun simulate_nonlinear(const MechanicalModel& model, const Gains& gains,
                                       const Equilibrium& eq, const Vec& x0,
                                       double dt = kDefaultTimeStep, double T = 5.0,
                                       const SimulationOptions& opt = {}) {
  gains.validate(model.m);
  NonlinearRun run;
  run.trajectory = detail::integrate_nonlinear(model, gains, eq, x0, dt, T);
  if (opt.check_convergence) {
    const Trajectory fine = detail::integrate_nonlinear(model, gains, eq, x0, 0.5 * dt, T);
    const Vec a = run.trajectory.final_state();
    const Vec b = fine.final_state();
    run.convergence_delta = (a - b).norm() / std::max(b.norm(), 1e-300);
  }
  return run;
}

/// Exact discretization x_{k+1} = exp(A·dt) x_k of ẋ = A x, with x the
/// offset (q − q⋆, p). When a Hessian is given, hd holds ½xᵀHx.
inline Trajectory simulate_linear(const Mat& A, const Vec& x0, double dt, double T,
                                  const Mat& hessian = Mat()) {
  if (!linalg::is_square(A) || A.rows() != x0.size() || A.rows() % 2 != 0) {
    throw Error(ErrorKind::Shape, "simulate_linear: A must be 2n x 2n matching x0");
  }
  const long steps = detail::step_count(dt, T);
  const auto n = A.rows() / 2;
  const Mat step_map = (A * dt).exp();
  Trajectory tr;
  Vec x = x0;
  for (long k = 0; k <= steps; ++k) {
    if (k > 0) x = step_map * x;
    tr.t.push_back(static_cast<double>(k) * dt);
    tr.q.push_back(x.head(n));
    tr.p.push_back(x.tail(n));
    tr.u.emplace_back();
    tr.hd.push_back(hessian.size() ? 0.5 * x.dot(hessian * x) : 0.0);
  }
  return tr;
}

struct OutputMetrics {
  bool applicable = true;   // false for a zero step
  bool reached = false;     // the band was crossed within the horizon
  bool settled = false;     // final-10 % window varies < 0.5 % of the step
  double rise_time = std::numeric_limits<double>::quiet_NaN();
  double overshoot_pct = 0.0;
  double peak_time = std::numeric_limits<double>::quiet_NaN();
  int oscillation_count = 0;
  double steady_state_value = std::numeric_limits<double>::quiet_NaN();
};

struct TransientMetrics {
  std::vector<OutputMetrics> outputs;
};

/// Sign changes of the tracking error are counted only once the error leaves
/// this fraction of the step, so rounding noise around the target is ignored.
inline constexpr double kOscillationDeadband = 1e-6;

/// Per-coordinate step metrics of q toward q_target.
///
/// Rise time is the first time |qᵢ(t) − qᵢ(0)| reaches band·|step|, linearly
/// interpolated between samples; later excursions are not considered.
/// Overshoot is measured against q_target, not the final sample.
inline TransientMetrics transient_metrics(const Trajectory& traj, const Vec& q_target,
                                          double band = kDefaultRiseBand) {
  if (!(band > 0.0 && band < 1.0)) {
    throw Error(ErrorKind::InvalidArgument, "transient_metrics: band must be in (0, 1)");
  }
  if (traj.size() < 2) {
    throw Error(ErrorKind::InvalidArgument, "transient_metrics: trajectory too short");
  }
  const auto n = q_target.size();
  TransientMetrics out;
  for (Eigen::Index i = 0; i < n; ++i) {
    OutputMetrics om;
    const double start = traj.q.front()(i);
    const double target = q_target(i);
    const double step = target - start;
    om.steady_state_value = target;
    if (step == 0.0) {
      om.applicable = false;
      out.outputs.push_back(om);
      continue;
    }
    const double dir = step > 0.0 ? 1.0 : -1.0;
    const double mag = std::abs(step);
    const double threshold = band * mag;

    std::size_t cross = traj.size();
    for (std::size_t k = 0; k < traj.size(); ++k) {
      const double progress = std::abs(traj.q[k](i) - start);
      if (progress >= threshold) {
        cross = k;
        break;
      }
    }
    if (cross < traj.size()) {
      om.reached = true;
      if (cross == 0) {
        om.rise_time = traj.t[0];
      } else {
        const double a = std::abs(traj.q[cross - 1](i) - start);
        const double b = std::abs(traj.q[cross](i) - start);
        const double frac = b > a ? (threshold - a) / (b - a) : 1.0;
        om.rise_time = traj.t[cross - 1] + frac * (traj.t[cross] - traj.t[cross - 1]);
      }
    }

    double peak = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < traj.size(); ++k) {
      const double excess = (traj.q[k](i) - target) * dir;
      if (excess > peak) {
        peak = excess;
        om.peak_time = traj.t[k];
      }
    }
    om.overshoot_pct = std::max(0.0, peak) / mag * 100.0;

    if (om.reached) {
      const double dead = kOscillationDeadband * mag;
      int last_sign = 0;
      for (std::size_t k = cross; k < traj.size(); ++k) {
        const double err = traj.q[k](i) - target;
        if (std::abs(err) <= dead) continue;
        const int sign = err > 0.0 ? 1 : -1;
        if (last_sign != 0 && sign != last_sign) ++om.oscillation_count;
        last_sign = sign;
      }
    }

    const std::size_t tail_start = traj.size() - std::max<std::size_t>(1, traj.size() / 10);
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (std::size_t k = tail_start; k < traj.size(); ++k) {
      lo = std::min(lo, traj.q[k](i));
      hi = std::max(hi, traj.q[k](i));
    }
    om.settled = (hi - lo) < 0.005 * mag;
    out.outputs.push_back(om);
  }
  return out;
}

/// Formats with 12 significant digits.
inline std::string format12(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

/// CSV with header `t,q1..qn,p1..pn,u1..um,Hd`, one row per grid point.
inline void write_trajectory_csv(std::ostream& os, const Trajectory& traj) {
  const auto n = traj.q.empty() ? 0 : traj.q.front().size();
  const auto m = traj.u.empty() ? 0 : traj.u.front().size();
  os << 't';
  for (Eigen::Index i = 1; i <= n; ++i) os << ",q" << i;
  for (Eigen::Index i = 1; i <= n; ++i) os << ",p" << i;
  for (Eigen::Index i = 1; i <= m; ++i) os << ",u" << i;
  os << ",Hd\n";
  for (std::size_t k = 0; k < traj.size(); ++k) {
    os << format12(traj.t[k]);
    for (Eigen::Index i = 0; i < n; ++i) os << ',' << format12(traj.q[k](i));
    for (Eigen::Index i = 0; i < n; ++i) os << ',' << format12(traj.p[k](i));
    for (Eigen::Index i = 0; i < m; ++i) os << ',' << format12(traj.u[k](i));
    os << ',' << format12(traj.hd[k]) << '\n';
  }
}

}  // namespace phtune
