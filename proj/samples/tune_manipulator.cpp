// Tunes the two-link manipulator for a no-overshoot response, then checks the
// result against a damping band and prints the rise-time bound.

#include <iostream>

#include "phtune/sim.hpp"
#include "phtune/tuning.hpp"

int main() {
  using namespace phtune;
  const MechanicalModel arm = builtin_manipulator();
  const Mat Ki = Eigen::Vector2d(35.0, 20.0).asDiagonal();
  const Mat Kd = Mat::Zero(2, 2);
  const Equilibrium eq = assign_equilibrium(arm, Eigen::Vector2d(0.6, 0.8), Ki);

  const TuningResult res = tune_no_overshoot(arm, eq, Ki, Kd);
  std::cout << "Kp = diag(" << res.gains.Kp(0, 0) << ", " << res.gains.Kp(1, 1) << ")\n"
            << "scenario " << to_string(res.report.scenario) << ", prop-1 margin "
            << res.report.prop1.margin << ", t_ru " << res.report.rise.t_ru << " s\n";

  const auto run = simulate_nonlinear(arm, res.gains, eq, Vec::Zero(4), 1e-3, 5.0);
  const auto metrics = transient_metrics(run.trajectory, eq.q_star);
  for (std::size_t i = 0; i < metrics.outputs.size(); ++i) {
    std::cout << "link " << i + 1 << ": rise " << metrics.outputs[i].rise_time << " s, overshoot "
              << metrics.outputs[i].overshoot_pct << " %\n";
  }
  return 0;
}
