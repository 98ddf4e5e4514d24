#pragma once

// JSON run configuration.
//
//   {
//     "schema": 1,
//     "model": "manipulator2dof"
//            | {"builtin": "pendulum", "mass": 1, "length": 1, "gravity": 9.81, "damping": 0}
//            | {"linear": {"mass": M, "stiffness": K, "damping": D, "input": G}},
//     "q_star": [0.6, 0.8],
//     "gains":  {"Kp": ..., "Ki": ..., "Kd": ...},
//     "target": {"mode": "NoOvershoot" | "DampingBand" | "RiseTime" | "Combined",
//                "zeta_lo": .., "zeta_hi": .., "t_r_max": ..,
//                "base_Kp": .., "base_Ki": .., "base_Kd": ..},
//     "sim":    {"x0": [..], "dt": 0.001, "T": 5.0},
//     "outputs": {"report": "report.json", "trajectory": "trajectory.csv",
//                 "metrics": "metrics.json"}
//   }
//
// A matrix is a number (1 × 1), a flat array (diagonal) or an array of rows.

#include <nlohmann/json.hpp>

#include <fstream>
#include <optional>
#include <sstream>
#include <string>

#include "phtune/sim.hpp"
#include "phtune/tuning.hpp"

namespace phtune {

inline constexpr int kConfigSchema = 1;

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(ErrorKind::Config, what) {}
};

struct SimSettings {
  Vec x0;
  double dt = kDefaultTimeStep;
  double T = 5.0;
};

struct OutputPaths {
  std::string report = "report.json";
  std::string trajectory = "trajectory.csv";
  std::string metrics = "metrics.json";
};

struct ModelSpec {
  nlohmann::json source;  // echoed verbatim into reports
  MechanicalModel model;
};

struct RunConfig {
  ModelSpec model;
  Vec q_star;
  std::optional<Gains> gains;
  std::optional<TuningTarget> target;
  std::optional<SimSettings> sim;
  OutputPaths outputs;
};

namespace config_detail {

using nlohmann::json;

[[noreturn]] inline void fail(const std::string& field, const std::string& msg) {
  throw ConfigError("config field '" + field + "': " + msg);
}

inline double number(const json& j, const std::string& field) {
  if (!j.is_number()) fail(field, "expected a number");
  return j.get<double>();
}

inline Vec vector(const json& j, const std::string& field) {
  if (!j.is_array()) fail(field, "expected an array of numbers");
  Vec v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    v(static_cast<Eigen::Index>(i)) = number(j[i], field + "[" + std::to_string(i) + "]");
  }
  return v;
}

inline Mat matrix(const json& j, const std::string& field) {
  if (j.is_number()) return Mat::Constant(1, 1, j.get<double>());
  if (!j.is_array() || j.empty()) fail(field, "expected a number, a diagonal, or rows");
  if (!j.front().is_array()) return vector(j, field).asDiagonal();
  const auto rows = j.size();
  const auto cols = j.front().size();
  Mat A(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    const std::string rf = field + "[" + std::to_string(r) + "]";
    if (!j[r].is_array() || j[r].size() != cols) fail(rf, "ragged matrix row");
    for (std::size_t c = 0; c < cols; ++c) {
      A(r, c) = number(j[r][c], rf + "[" + std::to_string(c) + "]");
    }
  }
  return A;
}

inline const json& require(const json& obj, const std::string& key, const std::string& field) {
  if (!obj.is_object() || !obj.contains(key)) fail(field.empty() ? key : field + "." + key, "missing");
  return obj.at(key);
}

inline ModelSpec parse_model(const json& j) {
  ModelSpec spec;
  spec.source = j;
  if (j.is_string()) {
    const auto name = j.get<std::string>();
    if (name == "manipulator2dof") {
      spec.model = builtin_manipulator();
    } else if (name == "pendulum") {
      spec.model = builtin_pendulum(1.0, 1.0, 9.81, 0.0);
    } else {
      fail("model", "unknown builtin '" + name + "'");
    }
    return spec;
  }
  if (!j.is_object()) fail("model", "expected a builtin name or an object");
  if (j.contains("builtin")) {
    const auto& b = j.at("builtin");
    if (!b.is_string()) fail("model.builtin", "expected a string");
    const auto name = b.get<std::string>();
    if (name == "manipulator2dof") {
      spec.model = builtin_manipulator();
    } else if (name == "pendulum") {
      const auto get = [&](const char* key, double dflt) {
        return j.contains(key) ? number(j.at(key), std::string("model.") + key) : dflt;
      };
      try {
        spec.model = builtin_pendulum(get("mass", 1.0), get("length", 1.0),
                                      get("gravity", 9.81), get("damping", 0.0));
      } catch (const Error& e) {
        fail("model", e.what());
      }
    } else {
      fail("model.builtin", "unknown builtin '" + name + "'");
    }
    return spec;
  }
  if (j.contains("linear")) {
    const auto& l = j.at("linear");
    const Mat M = matrix(require(l, "mass", "model.linear"), "model.linear.mass");
    const auto n = M.rows();
    const Mat K = l.contains("stiffness") ? matrix(l.at("stiffness"), "model.linear.stiffness")
                                          : Mat::Zero(n, n);
    const Mat D = l.contains("damping") ? matrix(l.at("damping"), "model.linear.damping")
                                        : Mat::Zero(n, n);
    const Mat G = l.contains("input") ? matrix(l.at("input"), "model.linear.input")
                                      : Mat::Identity(n, n);
    try {
      spec.model = linear_model(M, K, D, G);
    } catch (const Error& e) {
      fail("model.linear", e.what());
    }
    return spec;
  }
  fail("model", "expected 'builtin' or 'linear'");
}

inline Gains parse_gains(const json& j, int m) {
  if (!j.is_object()) fail("gains", "expected an object");
  Gains g;
  g.Kp = matrix(require(j, "Kp", "gains"), "gains.Kp");
  g.Ki = matrix(require(j, "Ki", "gains"), "gains.Ki");
  g.Kd = j.contains("Kd") ? matrix(j.at("Kd"), "gains.Kd") : Mat::Zero(m, m);
  try {
    g.validate(m);
  } catch (const Error& e) {
    fail("gains", e.what());
  }
  return g;
}

inline TuningTarget parse_target(const json& j, int m) {
  if (!j.is_object()) fail("target", "expected an object");
  const auto& mode = require(j, "mode", "target");
  if (!mode.is_string()) fail("target.mode", "expected a string");
  TuningTarget t;
  const auto parsed = parse_tuning_mode(mode.get<std::string>());
  if (!parsed) fail("target.mode", "unknown mode '" + mode.get<std::string>() + "'");
  t.mode = *parsed;
  if (j.contains("zeta_lo")) t.zeta_lo = number(j.at("zeta_lo"), "target.zeta_lo");
  if (j.contains("zeta_hi")) t.zeta_hi = number(j.at("zeta_hi"), "target.zeta_hi");
  if (j.contains("t_r_max")) t.t_r_max = number(j.at("t_r_max"), "target.t_r_max");
  const auto seed = [&](const char* key) -> std::optional<Mat> {
    if (!j.contains(key)) return std::nullopt;
    Mat K = matrix(j.at(key), std::string("target.") + key);
    if (K.rows() != m || K.cols() != m) {
      fail(std::string("target.") + key, "expected " + std::to_string(m) + " x " +
                                             std::to_string(m));
    }
    return K;
  };
  t.base_Kp = seed("base_Kp");
  t.base_Ki = seed("base_Ki");
  t.base_Kd = seed("base_Kd");
  try {
    t.validate();
  } catch (const Error& e) {
    fail("target", e.what());
  }
  return t;
}

inline SimSettings parse_sim(const json& j, int n) {
  if (!j.is_object()) fail("sim", "expected an object");
  SimSettings s;
  if (j.contains("x0")) {
    s.x0 = vector(j.at("x0"), "sim.x0");
    if (s.x0.size() != 2 * n) fail("sim.x0", "expected " + std::to_string(2 * n) + " entries");
  } else {
    s.x0 = Vec::Zero(2 * n);
  }
  if (j.contains("dt")) s.dt = number(j.at("dt"), "sim.dt");
  if (j.contains("T")) s.T = number(j.at("T"), "sim.T");
  if (!(s.dt > 0.0)) fail("sim.dt", "must be positive");
  if (!(s.T >= s.dt)) fail("sim.T", "must be at least dt");
  return s;
}

}  // namespace config_detail

inline RunConfig parse_config(const nlohmann::json& j) {
  using namespace config_detail;
  if (!j.is_object()) fail("<root>", "expected a JSON object");
  const auto& schema = require(j, "schema", "");
  if (!schema.is_number_integer() || schema.get<int>() != kConfigSchema) {
    fail("schema", "expected " + std::to_string(kConfigSchema));
  }
  RunConfig cfg;
  cfg.model = parse_model(require(j, "model", ""));
  const int n = cfg.model.model.n;
  const int m = cfg.model.model.m;
  cfg.q_star = vector(require(j, "q_star", ""), "q_star");
  if (cfg.q_star.size() != n) fail("q_star", "expected " + std::to_string(n) + " entries");
  if (j.contains("gains")) cfg.gains = parse_gains(j.at("gains"), m);
  if (j.contains("target")) cfg.target = parse_target(j.at("target"), m);
  if (j.contains("sim")) cfg.sim = parse_sim(j.at("sim"), n);
  if (j.contains("outputs")) {
    const auto& o = j.at("outputs");
    if (!o.is_object()) fail("outputs", "expected an object");
    const auto str = [&](const char* key, std::string& dst) {
      if (!o.contains(key)) return;
      if (!o.at(key).is_string()) fail(std::string("outputs.") + key, "expected a string");
      dst = o.at(key).get<std::string>();
    };
    str("report", cfg.outputs.report);
    str("trajectory", cfg.outputs.trajectory);
    str("metrics", cfg.outputs.metrics);
  }
  return cfg;
}

/// Parses JSON text; syntax errors report the line and column.
inline nlohmann::json parse_json_text(const std::string& text, const std::string& origin) {
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i < text.size() && i + 1 < e.byte; ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    std::ostringstream os;
    os << origin << ":" << line << ":" << col << ": malformed JSON";
    throw ConfigError(os.str());
  }
}

inline RunConfig load_config(const std::string& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError("cannot open config file '" + file + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(parse_json_text(ss.str(), file));
}

}  // namespace phtune
