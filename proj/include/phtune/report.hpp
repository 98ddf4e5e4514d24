#pragma once

// JSON serialization of analysis, tuning and simulation results. Derived
// numbers are rounded to 12 significant digits; gains are written at full
// precision so a report can be fed back in as a configuration.

#include <nlohmann/json.hpp>

#include <cstdlib>

#include "phtune/config.hpp"
#include "phtune/sim.hpp"
#include "phtune/tuning.hpp"

namespace phtune {

using nlohmann::json;

inline double round12(double v) {
  if (!std::isfinite(v)) return v;
  return std::strtod(format12(v).c_str(), nullptr);
}

inline json to_json12(double v) {
  if (!std::isfinite(v)) return nullptr;
  return round12(v);
}

inline json to_json12(const Vec& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(to_json12(v(i)));
  return a;
}

inline json to_json12(const Mat& A) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < A.rows(); ++r) rows.push_back(to_json12(Vec(A.row(r).transpose())));
  return rows;
}

inline json to_json_exact(const Mat& A) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < A.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < A.cols(); ++c) row.push_back(A(r, c));
    rows.push_back(row);
  }
  return rows;
}

inline json to_json_exact(const Vec& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

inline json to_json(const Gains& g) {
  return {{"Kp", to_json_exact(g.Kp)}, {"Ki", to_json_exact(g.Ki)}, {"Kd", to_json_exact(g.Kd)}};
}

inline json to_json(const TuningTarget& t) {
  json j{{"mode", to_string(t.mode)}};
  if (t.zeta_lo) j["zeta_lo"] = *t.zeta_lo;
  if (t.zeta_hi) j["zeta_hi"] = *t.zeta_hi;
  if (t.t_r_max) j["t_r_max"] = *t.t_r_max;
  if (t.base_Kp) j["base_Kp"] = to_json_exact(*t.base_Kp);
  if (t.base_Ki) j["base_Ki"] = to_json_exact(*t.base_Ki);
  if (t.base_Kd) j["base_Kd"] = to_json_exact(*t.base_Kd);
  return j;
}

inline json spectrum_json(const std::vector<Complex>& eigs) {
  json a = json::array();
  for (const auto& e : eigs) a.push_back({{"re", to_json12(e.real())}, {"im", to_json12(e.imag())}});
  return a;
}

inline json to_json(const SpectralReport& r) {
  json z{{"zeta_min", to_json12(r.zeta.zeta_min)},
         {"zeta_max", to_json12(r.zeta.zeta_max)},
         {"zeta_lower", to_json12(std::sqrt(r.zeta.zeta_min))},
         {"zeta_upper", to_json12(std::sqrt(r.zeta.zeta_max))}};
  json ratios = json::array();
  for (double d : r.damping_ratios) ratios.push_back(to_json12(d));
  return {
      {"sign_convention", "eigenvalues are of N; closed-loop poles are their negatives"},
      {"eigenvalues", spectrum_json(r.eigenvalues)},
      {"im_tol", to_json12(r.im_tol)},
      {"marginal_count", r.marginal_count},
      {"scenario", to_string(r.scenario)},
      {"prop1", {{"satisfied", r.prop1.satisfied}, {"margin", to_json12(r.prop1.margin)}}},
      {"zeta_bounds", z},
      {"damping_ratios", ratios},
      {"eigenvalue_bands",
       {{"complex_re_lo", to_json12(r.bands.complex_re_lo)},
        {"complex_re_hi", to_json12(r.bands.complex_re_hi)},
        {"real_lo", to_json12(r.bands.real_lo)},
        {"real_hi", to_json12(r.bands.real_hi)},
        {"advisory", r.bands.advisory}}},
      {"rise_time",
       {{"re_lambda_u", to_json12(r.rise.re_lambda_u)},
        {"t_ru", to_json12(r.rise.t_ru)},
        {"lambda_min_WinvR", to_json12(r.rise.wr_min)},
        {"lambda_min_RinvP", to_json12(r.rise.rp_min)},
        {"advisory", r.rise.advisory}}},
  };
}

inline json saddle_json(const SaddleForm& s) {
  return {
      {"matrices",
       {{"R", to_json12(s.R)}, {"P", to_json12(s.P)}, {"W", to_json12(s.W)},
        {"phiP", to_json12(s.phiP)}, {"phiW", to_json12(s.phiW)}, {"N", to_json12(s.N)}}},
      {"spectra",
       {{"R", to_json12(linalg::sym_eigenvalues(s.R))},
        {"P", to_json12(linalg::sym_eigenvalues(s.P))},
        {"W", to_json12(linalg::sym_eigenvalues(s.W))}}},
  };
}

/// Header shared by every report; makes a report loadable as a config.
inline json report_header(const RunConfig& cfg, const char* command, const Equilibrium& eq) {
  return {{"schema", kConfigSchema},
          {"command", command},
          {"model", cfg.model.source},
          {"q_star", to_json_exact(cfg.q_star)},
          {"kappa", to_json12(eq.kappa)}};
}

inline json to_json(const TuningResult& r) {
  json trace = json::array();
  for (const auto& [x, mg] : r.search_trace) trace.push_back({to_json12(x), to_json12(mg)});
  return {{"feasible", r.feasible},
          {"margin", to_json12(r.margin)},
          {"iterations", r.iterations},
          {"warnings", r.warnings},
          {"search_trace", trace}};
}

inline json to_json(const OutputMetrics& m) {
  return {{"applicable", m.applicable},
          {"reached", m.reached},
          {"settled", m.settled},
          {"rise_time_98", to_json12(m.rise_time)},
          {"overshoot_pct", to_json12(m.overshoot_pct)},
          {"peak_time", to_json12(m.peak_time)},
          {"oscillation_count", m.oscillation_count},
          {"steady_state_value", to_json12(m.steady_state_value)}};
}

inline json to_json(const TransientMetrics& t) {
  json a = json::array();
  for (const auto& m : t.outputs) a.push_back(to_json(m));
  return a;
}

}  // namespace phtune
