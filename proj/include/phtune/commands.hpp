#pragma once

// analyze / tune / verify / simulate / demo workflows behind the phtune CLI.
// Each returns the process exit code:
//   0 success, 2 config, 3 assumption, 4 infeasible, 5 divergence.

#include <filesystem>
#include <fstream>
#include <future>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "phtune/report.hpp"

namespace phtune {

enum ExitCode : int {
  kExitOk = 0,
  kExitInternal = 1,
  kExitConfig = 2,
  kExitAssumption = 3,
  kExitInfeasible = 4,
  kExitDivergence = 5,
};

inline int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Config:
    case ErrorKind::Shape:
    case ErrorKind::InvalidParameter:
    case ErrorKind::InvalidArgument:
    case ErrorKind::Rank:
      return kExitConfig;
    case ErrorKind::AssumptionFailure:
    case ErrorKind::Decomposition:
    case ErrorKind::UnassignableEquilibrium:
    case ErrorKind::NumericalSingularity:
      return kExitAssumption;
    case ErrorKind::Infeasible:
      return kExitInfeasible;
    case ErrorKind::Divergence:
      return kExitDivergence;
    case ErrorKind::Solver:
    case ErrorKind::UndefinedRatio:
      return kExitInternal;
  }
  return kExitInternal;
}

namespace fs = std::filesystem;

namespace cmd_detail {

inline void write_json(const fs::path& file, const json& j) {
  if (file.has_parent_path()) fs::create_directories(file.parent_path());
  std::ofstream out(file);
  if (!out) throw Error(ErrorKind::Config, "cannot write '" + file.string() + "'");
  out << j.dump(2) << '\n';
}

inline fs::path resolve(const fs::path& out_dir, const std::string& name) {
  const fs::path p(name);
  return p.is_absolute() ? p : out_dir / p;
}

inline const Gains& need_gains(const RunConfig& cfg, const char* command) {
  if (!cfg.gains) throw ConfigError(std::string(command) + ": config field 'gains': missing");
  return *cfg.gains;
}

}  // namespace cmd_detail

struct AnalyzeOutcome {
  Equilibrium eq;
  SaddleForm saddle;
  SpectralReport report;
  json doc;
};

inline AnalyzeOutcome analyze(const RunConfig& cfg, const Gains& gains, const char* command) {
  AnalyzeOutcome a;
  const auto& model = cfg.model.model;
  a.eq = assign_equilibrium(model, cfg.q_star, gains.Ki);
  a.saddle = make_saddle_form(model, gains, a.eq);
  a.report = analyze_saddle(a.saddle);
  a.doc = report_header(cfg, command, a.eq);
  a.doc["gains"] = to_json(gains);
  a.doc.update(saddle_json(a.saddle));
  a.doc["analysis"] = to_json(a.report);
  return a;
}

inline int cmd_analyze(const RunConfig& cfg, const fs::path& out_dir, std::ostream& log) {
  const Gains& gains = cmd_detail::need_gains(cfg, "analyze");
  const auto a = analyze(cfg, gains, "analyze");
  const auto file = cmd_detail::resolve(out_dir, cfg.outputs.report);
  cmd_detail::write_json(file, a.doc);
  log << "scenario " << to_string(a.report.scenario) << ", t_ru "
      << format12(a.report.rise.t_ru) << " s, prop-1 margin "
      << format12(a.report.prop1.margin) << " -> " << file.string() << '\n';
  return kExitOk;
}

inline int cmd_verify(const RunConfig& cfg, const fs::path& out_dir, std::ostream& log) {
  const Gains& gains = cmd_detail::need_gains(cfg, "verify");
  if (!cfg.target) throw ConfigError("verify: config field 'target': missing");
  auto a = analyze(cfg, gains, "verify");
  const auto res = verify_gains(cfg.model.model, a.eq, gains, *cfg.target);
  a.doc["target"] = to_json(*cfg.target);
  a.doc["verification"] = to_json(res);
  const auto file = cmd_detail::resolve(out_dir, cfg.outputs.report);
  cmd_detail::write_json(file, a.doc);
  log << to_string(cfg.target->mode) << ": " << (res.feasible ? "satisfied" : "not satisfied")
      << " (margin " << format12(res.margin) << ") -> " << file.string() << '\n';
  return res.feasible ? kExitOk : kExitInfeasible;
}

inline int cmd_tune(const RunConfig& cfg, const fs::path& out_dir, std::ostream& log) {
  if (!cfg.target) throw ConfigError("tune: config field 'target': missing");
  if (!cfg.target->base_Ki) throw ConfigError("tune: config field 'target.base_Ki': missing");
  const auto& model = cfg.model.model;
  const auto eq = assign_equilibrium(model, cfg.q_star, *cfg.target->base_Ki);

  TuningResult res;
  std::string error;
  try {
    res = tune(model, eq, *cfg.target);
  } catch (const InfeasibleError& e) {
    res = e.best();
    error = e.what();
  }
  // κ depends on the final Ki; the saddle data is recomputed from scratch.
  auto a = analyze(cfg, res.gains, "tune");
  a.doc["target"] = to_json(*cfg.target);
  a.doc["tuning"] = to_json(res);
  if (!error.empty()) a.doc["tuning"]["error"] = error;
  const auto file = cmd_detail::resolve(out_dir, cfg.outputs.report);
  cmd_detail::write_json(file, a.doc);
  if (res.feasible) {
    log << "feasible: Kp diag ~ " << format12(res.gains.Kp(0, 0)) << ", t_ru "
        << format12(a.report.rise.t_ru) << " s -> " << file.string() << '\n';
  } else {
    log << "infeasible: " << error << " -> " << file.string() << '\n';
  }
  for (const auto& w : res.warnings) log << "warning: " << w << '\n';
  return res.feasible ? kExitOk : kExitInfeasible;
}

struct SimulateOutcome {
  Equilibrium eq;
  SpectralReport report;
  NonlinearRun run;
  Trajectory linear;
  TransientMetrics nonlinear_metrics;
  TransientMetrics linear_metrics;
};

inline SimulateOutcome simulate(const RunConfig& cfg, const Gains& gains, const SimSettings& sim,
                                bool check_convergence = false) {
  const auto& model = cfg.model.model;
  SimulateOutcome o;
  o.eq = assign_equilibrium(model, cfg.q_star, gains.Ki);
  o.report = analyze_saddle(make_saddle_form(model, gains, o.eq));
  SimulationOptions opt;
  opt.check_convergence = check_convergence;
  o.run = simulate_nonlinear(model, gains, o.eq, sim.x0, sim.dt, sim.T, opt);
  o.nonlinear_metrics = transient_metrics(o.run.trajectory, cfg.q_star);

  Vec dx0 = sim.x0;
  dx0.head(model.n) -= cfg.q_star;
  o.linear = simulate_linear(linearize_closed_loop(model, gains, o.eq), dx0, sim.dt, sim.T,
                             hessian_hd(model, gains, o.eq));
  o.linear_metrics = transient_metrics(o.linear, Vec::Zero(model.n));
  return o;
}

inline int cmd_simulate(const RunConfig& cfg, const fs::path& out_dir, std::ostream& log) {
  const Gains& gains = cmd_detail::need_gains(cfg, "simulate");
  if (!cfg.sim) throw ConfigError("simulate: config field 'sim': missing");
  const auto o = simulate(cfg, gains, *cfg.sim);

  const auto csv = cmd_detail::resolve(out_dir, cfg.outputs.trajectory);
  if (csv.has_parent_path()) fs::create_directories(csv.parent_path());
  std::ofstream out(csv);
  if (!out) throw Error(ErrorKind::Config, "cannot write '" + csv.string() + "'");
  write_trajectory_csv(out, o.run.trajectory);

  json metrics = report_header(cfg, "simulate", o.eq);
  metrics["gains"] = to_json(gains);
  metrics["sim"] = {{"x0", to_json_exact(cfg.sim->x0)}, {"dt", cfg.sim->dt}, {"T", cfg.sim->T}};
  metrics["t_ru"] = to_json12(o.report.rise.t_ru);
  metrics["scenario"] = to_string(o.report.scenario);
  metrics["nonlinear"] = to_json(o.nonlinear_metrics);
  metrics["linearized"] = to_json(o.linear_metrics);
  metrics["final_state"] = to_json12(o.run.trajectory.final_state());
  const auto mfile = cmd_detail::resolve(out_dir, cfg.outputs.metrics);
  cmd_detail::write_json(mfile, metrics);
  log << "simulated " << o.run.trajectory.size() << " samples -> " << csv.string() << ", "
      << mfile.string() << '\n';
  return kExitOk;
}

/// Reference gain sets on the two-link manipulator.
inline std::optional<Gains> demo_gains(const std::string& name) {
  if (name == "rt") {
    return Gains::diagonal(Eigen::Vector2d(1.0, 0.5), Eigen::Vector2d(50.0, 30.0),
                           Eigen::Vector2d(0.0, 0.0));
  }
  if (name == "e1") {
    return Gains::diagonal(Eigen::Vector2d(7.3972, 9.2), Eigen::Vector2d(35.0, 20.0),
                           Eigen::Vector2d(0.0, 0.0));
  }
  if (name == "e2") {
    return Gains::diagonal(Eigen::Vector2d(3.9136, 4.1710), Eigen::Vector2d(50.0, 45.0),
                           Eigen::Vector2d(0.08, 0.15));
  }
  return std::nullopt;
}

inline RunConfig demo_config(const std::string& name) {
  RunConfig cfg;
  cfg.model.source = "manipulator2dof";
  cfg.model.model = builtin_manipulator();
  cfg.q_star = Eigen::Vector2d(0.6, 0.8);
  cfg.gains = demo_gains(name);
  cfg.sim = SimSettings{Vec::Zero(4), kDefaultTimeStep, 5.0};
  cfg.outputs.report = "demo_" + name + "_report.json";
  cfg.outputs.trajectory = "demo_" + name + "_trajectory.csv";
  cfg.outputs.metrics = "demo_" + name + "_metrics.json";
  return cfg;
}

/// Runs analysis and simulation for one gain set and returns the printed
/// comparison block.
inline std::string run_demo(const std::string& name, const std::optional<fs::path>& out_dir) {
  const RunConfig cfg = demo_config(name);
  const auto a = analyze(cfg, *cfg.gains, "demo");
  const auto o = simulate(cfg, *cfg.gains, *cfg.sim);
  if (out_dir) {
    cmd_detail::write_json(cmd_detail::resolve(*out_dir, cfg.outputs.report), a.doc);
    const auto csv = cmd_detail::resolve(*out_dir, cfg.outputs.trajectory);
    fs::create_directories(csv.parent_path());
    std::ofstream out(csv);
    write_trajectory_csv(out, o.run.trajectory);
  }

  std::ostringstream os;
  std::string upper = name;
  for (auto& ch : upper) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
  const auto cell = [](const OutputMetrics& m) {
    std::ostringstream c;
    if (m.reached) {
      c << std::fixed << std::setprecision(3) << m.rise_time;
    } else {
      c << "n/a";
    }
    return c.str();
  };
  const auto pct = [](const OutputMetrics& m) {
    std::ostringstream c;
    c << std::fixed << std::setprecision(2) << m.overshoot_pct;
    return c.str();
  };
  os << upper << "  (manipulator2dof, q* = (0.6, 0.8), x0 = 0)\n";
  os << "  scenario " << to_string(a.report.scenario) << ", prop-1 "
     << (a.report.prop1.satisfied ? "satisfied" : "not satisfied") << " (margin "
     << format12(a.report.prop1.margin) << "), ";
  if (a.report.zeta.zeta_min >= 1.0) {
    os << "no complex pairs possible\n";
  } else {
    os << "zeta in [" << std::setprecision(4) << std::sqrt(a.report.zeta.zeta_min) << ", "
       << std::sqrt(std::min(a.report.zeta.zeta_max, 1.0)) << "]\n";
  }
  os << "                          L1        L2\n";
  os << "  nominal t_ru (s)        " << std::fixed << std::setprecision(3)
     << a.report.rise.t_ru << "\n";
  os << "  rise 98% nonlinear (s)  " << std::setw(8) << std::left
     << cell(o.nonlinear_metrics.outputs[0]) << "  " << cell(o.nonlinear_metrics.outputs[1])
     << "\n";
  os << "  rise 98% linear (s)     " << std::setw(8) << std::left
     << cell(o.linear_metrics.outputs[0]) << "  " << cell(o.linear_metrics.outputs[1]) << "\n";
  os << "  overshoot nonlinear (%) " << std::setw(8) << std::left
     << pct(o.nonlinear_metrics.outputs[0]) << "  " << pct(o.nonlinear_metrics.outputs[1])
     << "\n";
  os << "  oscillations nonlinear  " << std::setw(8) << std::left
     << o.nonlinear_metrics.outputs[0].oscillation_count << "  "
     << o.nonlinear_metrics.outputs[1].oscillation_count << "\n";
  return os.str();
}

/// `name` is rt, e1, e2 or all; `all` runs the three sets on up to `jobs`
/// threads and prints them in a fixed order.
inline int cmd_demo(const std::string& name, const std::optional<fs::path>& out_dir, int jobs,
                    std::ostream& log) {
  std::vector<std::string> names;
  if (name == "all") {
    names = {"rt", "e1", "e2"};
  } else if (demo_gains(name)) {
    names = {name};
  } else {
    throw ConfigError("demo: unknown name '" + name + "' (expected rt, e1, e2 or all)");
  }
  std::vector<std::string> blocks(names.size());
  if (jobs <= 1) {
    for (std::size_t i = 0; i < names.size(); ++i) blocks[i] = run_demo(names[i], out_dir);
  } else {
    std::vector<std::future<std::string>> pending;
    std::size_t next = 0;
    while (next < names.size()) {
      pending.clear();
      const std::size_t batch_start = next;
      for (int j = 0; j < jobs && next < names.size(); ++j, ++next) {
        pending.push_back(std::async(std::launch::async, run_demo, names[next], out_dir));
      }
      for (std::size_t k = 0; k < pending.size(); ++k) blocks[batch_start + k] = pending[k].get();
    }
  }
  for (const auto& b : blocks) log << b;
  return kExitOk;
}

}  // namespace phtune
