#pragma once

// Gain synthesis by one-dimensional scaling of seed matrices.
//
// Every search scales a positive-definite seed, Kp = c · base_Kp (or
// Ki = s · Ki_seed for the rise-time loop), and relies on λ_min(R) and
// λ_max(R) being non-decreasing in c.

#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "phtune/spectral.hpp"

namespace phtune {

enum class TuningMode { NoOvershoot, DampingBand, RiseTime, Combined };

inline const char* to_string(TuningMode mode) {
  switch (mode) {
    case TuningMode::NoOvershoot: return "NoOvershoot";
    case TuningMode::DampingBand: return "DampingBand";
    case TuningMode::RiseTime: return "RiseTime";
    case TuningMode::Combined: return "Combined";
  }
  return "?";
}

inline std::optional<TuningMode> parse_tuning_mode(const std::string& s) {
  if (s == "NoOvershoot") return TuningMode::NoOvershoot;
  if (s == "DampingBand") return TuningMode::DampingBand;
  if (s == "RiseTime") return TuningMode::RiseTime;
  if (s == "Combined") return TuningMode::Combined;
  return std::nullopt;
}

/// RiseTime pairs the rise-time loop with the no-overshoot rule; Combined
/// pairs it with the damping band and needs both zeta_lo/zeta_hi and t_r_max.
struct TuningTarget {
  TuningMode mode = TuningMode::NoOvershoot;
  std::optional<double> zeta_lo;
  std::optional<double> zeta_hi;
  std::optional<double> t_r_max;
  std::optional<Mat> base_Kp;
  std::optional<Mat> base_Ki;
  std::optional<Mat> base_Kd;

  void validate() const {
    const bool band = mode == TuningMode::DampingBand || mode == TuningMode::Combined;
    const bool rise = mode == TuningMode::RiseTime || mode == TuningMode::Combined;
    if (band) {
      if (!zeta_lo || !zeta_hi) {
        throw Error(ErrorKind::InvalidArgument, "damping band needs zeta_lo and zeta_hi");
      }
      if (!(*zeta_lo > 0.0 && *zeta_lo < *zeta_hi && *zeta_hi <= 1.0)) {
        throw Error(ErrorKind::InvalidArgument,
                    "damping band needs 0 < zeta_lo < zeta_hi <= 1");
      }
    }
    if (rise && !(t_r_max && *t_r_max > 0.0)) {
      throw Error(ErrorKind::InvalidArgument, "rise-time target needs t_r_max > 0");
    }
  }
};

struct TuningOptions {
  double rel_tol = 1e-6;       // bisection tolerance on the scalar
  int max_bisection = 100;
  double c_max = 1e6;          // upper limit on the Kp scale
  int rise_iteration_cap = 50;
  double ki_scale_max = 1e4;   // upper limit on the Ki scale
  double c_floor = 1e-6;       // Kp scale used when c⋆ = 0 (Kp must stay PD)
  double t_r_rel_slack = 1e-9;
};

struct TuningResult {
  Gains gains;
  SpectralReport report;
  bool feasible = false;
  double margin = 0.0;  // mode-specific, ≥ 0 iff the condition holds
  std::vector<std::pair<double, double>> search_trace;  // (scalar, margin)
  std::vector<std::string> warnings;
  int iterations = 0;
};

/// A requested target cannot be met. The best attempt is attached.
class InfeasibleError : public Error {
 public:
  InfeasibleError(TuningResult best, const std::string& what)
      : Error(ErrorKind::Infeasible, what), best_(std::move(best)) {}

  const TuningResult& best() const noexcept { return best_; }

 private:
  TuningResult best_;
};

namespace detail {

struct FixedTerms {
  Mat D;       // D⋆
  Mat G;
  Mat P;
  Mat W;
  Mat GBG;     // G base_Kp Gᵀ
};

inline FixedTerms fixed_terms(const MechanicalModel& model, const Equilibrium& eq,
                              const Mat& Ki, const Mat& Kd, const Mat& base_Kp) {
  FixedTerms t;
  t.G = model.input_matrix;
  t.D = model.damping(eq.q_star, rest_momentum(model));
  t.P = linalg::symmetrize(model.potential_hess(eq.q_star) + t.G * Ki * t.G.transpose());
  t.W = linalg::symmetrize(model.mass(eq.q_star) + t.G * Kd * t.G.transpose());
  t.GBG = t.G * base_Kp * t.G.transpose();
  return t;
}

inline Mat r_of(const FixedTerms& t, double c) {
  return linalg::symmetrize(t.D + c * t.GBG);
}

/// Smallest c in [lo, hi] with pred(c) true, assuming pred is monotone
/// (false … false true … true) and pred(hi) holds.
template <typename Pred, typename Trace>
double bisect_first_true(Pred&& pred, double lo, double hi, const TuningOptions& opt,
                         Trace&& trace) {
  for (int it = 0; it < opt.max_bisection; ++it) {
    if (hi - lo <= opt.rel_tol * std::max(hi, 1e-300)) break;
    const double mid = 0.5 * (lo + hi);
    if (pred(mid, trace)) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return hi;
}

/// Largest c in [lo, hi] with pred(c) true for pred monotone
/// (true … true false … false) and pred(lo) holding.
template <typename Pred, typename Trace>
double bisect_last_true(Pred&& pred, double lo, double hi, const TuningOptions& opt,
                        Trace&& trace) {
  for (int it = 0; it < opt.max_bisection; ++it) {
    if (hi - lo <= opt.rel_tol * std::max(hi, 1e-300)) break;
    const double mid = 0.5 * (lo + hi);
    if (pred(mid, trace)) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return lo;
}

inline void check_seed(const Mat& K, int m, const char* what, bool definite) {
  if (K.rows() != m || K.cols() != m) {
    throw Error(ErrorKind::Shape, std::string(what) + " has wrong dimensions");
  }
  const bool ok = definite ? linalg::is_positive_definite(K)
                           : linalg::is_positive_semidefinite(K);
  if (!ok) {
    throw Error(ErrorKind::InvalidArgument,
                std::string(what) + (definite ? " must be positive definite"
                                              : " must be positive semi-definite"));
  }
}

}  // namespace detail

/// Mode condition margin for an analyzed gain set; ≥ 0 iff satisfied.
inline double target_margin(const SpectralReport& rep, const TuningTarget& target,
                            const TuningOptions& opt = {}) {
  const auto band_margin = [&] {
    return std::min(rep.zeta.zeta_min - (*target.zeta_lo) * (*target.zeta_lo),
                    (*target.zeta_hi) * (*target.zeta_hi) - rep.zeta.zeta_max);
  };
  const auto rise_margin = [&] {
    return *target.t_r_max * (1.0 + opt.t_r_rel_slack) - rep.rise.t_ru;
  };
  switch (target.mode) {
    case TuningMode::NoOvershoot: return rep.prop1.margin;
    case TuningMode::DampingBand: return band_margin();
    case TuningMode::RiseTime: return std::min(rep.prop1.margin, rise_margin());
    case TuningMode::Combined: return std::min(band_margin(), rise_margin());
  }
  return -1.0;
}

/// Builds the saddle form and spectral report for `gains` and evaluates the
/// target condition. Gains are never modified.
inline TuningResult verify_gains(const MechanicalModel& model, const Equilibrium& eq,
                                 const Gains& gains, const TuningTarget& target,
                                 const TuningOptions& opt = {}) {
  target.validate();
  TuningResult res;
  res.gains = gains;
  res.report = analyze_saddle(make_saddle_form(model, gains, eq));
  res.margin = target_margin(res.report, target, opt);
  res.feasible = res.margin >= 0.0;
  return res;
}

namespace detail {

struct NoOvershootScale {
  double c = 0.0;
  std::vector<std::pair<double, double>> trace;
  std::vector<std::string> warnings;
};

inline NoOvershootScale no_overshoot_scale(const MechanicalModel& model,
                                           const FixedTerms& t, bool identity_path,
                                           const TuningOptions& opt) {
  NoOvershootScale out;
  const double need = 4.0 * linalg::lambda_max(t.P) * linalg::lambda_max(t.W);
  const auto margin = [&](double c) {
    const double r = linalg::lambda_min(r_of(t, c));
    return r * r - need;
  };
  const auto pred = [&](double c, std::vector<std::pair<double, double>>& trace) {
    const double mg = margin(c);
    trace.emplace_back(c, mg);
    return mg >= 0.0;
  };

  const double d_min = linalg::lambda_min(t.D);
  if (model.m < model.n && linalg::lambda_min(t.GBG) <= 1e-12 * linalg::lambda_max(t.GBG) &&
      d_min <= 1e-12) {
    throw Error(ErrorKind::Infeasible,
                "no-overshoot rule infeasible: the system is underactuated (m < n), so "
                "lambda_min(G Kp G^T) = 0 and lambda_min(R)^2 reduces to "
                "lambda_min(D*)^2 = 0 regardless of Kp");
  }

  if (pred(0.0, out.trace)) {
    out.c = 0.0;
    return out;
  }
  double hi = 1.0;
  while (!pred(hi, out.trace)) {
    hi *= 2.0;
    if (hi > opt.c_max) {
      std::ostringstream os;
      os << "no-overshoot rule infeasible below Kp scale limit " << opt.c_max
         << " (margin at limit " << margin(opt.c_max) << ")";
      throw Error(ErrorKind::Infeasible, os.str());
    }
  }
  const double c_bisect = bisect_first_true(pred, hi == 1.0 ? 0.0 : 0.5 * hi, hi, opt,
                                            out.trace);
  out.c = c_bisect;

  if (identity_path) {
    // Closed form for G = I, base_Kp = I: λ_min(D⋆ + cI) = λ_min(D⋆) + c.
    double c_closed = std::max(0.0, std::sqrt(need) - d_min);
    // Land on the feasible side of the boundary despite rounding.
    for (int k = 0; k < 64 && margin(c_closed) < 0.0; ++k) {
      c_closed = std::nextafter(c_closed, std::numeric_limits<double>::infinity()) *
                 (1.0 + 4.0 * std::numeric_limits<double>::epsilon());
    }
    if (std::abs(c_closed - c_bisect) > 10.0 * opt.rel_tol * std::max(c_closed, 1.0)) {
      std::ostringstream os;
      os << "closed-form Kp scale " << c_closed << " disagrees with bisection "
         << c_bisect;
      out.warnings.push_back(os.str());
    }
    out.c = c_closed;
  }
  return out;
}

inline bool is_identity(const Mat& A) {
  return linalg::is_square(A) && A.isApprox(Mat::Identity(A.rows(), A.cols()), 0.0);
}

}  // namespace detail

/// Smallest Kp = c⋆ · base_Kp for which 4λ_max(P)λ_max(W) ≤ λ_min(R)².
/// Ki and Kd stay fixed.
inline TuningResult tune_no_overshoot(const MechanicalModel& model,
                                      const Equilibrium& eq, const Mat& Ki,
                                      const Mat& Kd,
                                      const std::optional<Mat>& base_Kp = std::nullopt,
                                      const TuningOptions& opt = {}) {
  const Mat base = base_Kp.value_or(Mat::Identity(model.m, model.m));
  detail::check_seed(Ki, model.m, "Ki", true);
  detail::check_seed(Kd, model.m, "Kd", false);
  detail::check_seed(base, model.m, "base_Kp", true);

  const auto terms = detail::fixed_terms(model, eq, Ki, Kd, base);
  const bool identity_path = model.m == model.n &&
                             detail::is_identity(model.input_matrix) &&
                             detail::is_identity(base);
  TuningTarget target;
  target.mode = TuningMode::NoOvershoot;

  detail::NoOvershootScale scale;
  try {
    scale = detail::no_overshoot_scale(model, terms, identity_path, opt);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::Infeasible) throw;
    TuningResult best;
    best.gains = Gains{opt.c_max * base, Ki, Kd};
    try {
      best = verify_gains(model, eq, best.gains, target, opt);
    } catch (const Error&) {
    }
    best.feasible = false;
    throw InfeasibleError(best, e.what());
  }

  std::vector<std::string> warnings = scale.warnings;
  if (!Kd.isZero(0.0)) {
    const auto terms0 = detail::fixed_terms(model, eq, Ki, Mat::Zero(model.m, model.m), base);
    try {
      const auto scale0 = detail::no_overshoot_scale(model, terms0, identity_path, opt);
      if (scale.c > 1.1 * scale0.c) {
        std::ostringstream os;
        os << "Kd raises the required Kp scale from " << scale0.c << " to " << scale.c;
        warnings.push_back(os.str());
      }
    } catch (const Error&) {
    }
  }

  double c = scale.c;
  if (c < opt.c_floor) {
    warnings.push_back("natural damping already satisfies the no-overshoot rule; "
                       "Kp set to the floor scale to keep it positive definite");
    c = opt.c_floor;
  }
  TuningResult res = verify_gains(model, eq, Gains{c * base, Ki, Kd}, target, opt);
  res.search_trace = std::move(scale.trace);
  res.warnings = std::move(warnings);
  return res;
}

/// Kp = c · base_Kp with zeta_lo² ≤ ζ_min and ζ_max ≤ zeta_hi². Picks the
/// middle of the feasible interval of c (its lower end when the upper
/// constraint never binds).
inline TuningResult tune_damping_band(const MechanicalModel& model, const Equilibrium& eq,
                                      double zeta_lo, double zeta_hi, const Mat& Ki,
                                      const Mat& Kd,
                                      const std::optional<Mat>& base_Kp = std::nullopt,
                                      const TuningOptions& opt = {}) {
  TuningTarget target;
  target.mode = TuningMode::DampingBand;
  target.zeta_lo = zeta_lo;
  target.zeta_hi = zeta_hi;
  target.validate();

  const Mat base = base_Kp.value_or(Mat::Identity(model.m, model.m));
  detail::check_seed(Ki, model.m, "Ki", true);
  detail::check_seed(Kd, model.m, "Kd", false);
  detail::check_seed(base, model.m, "base_Kp", true);
  const auto t = detail::fixed_terms(model, eq, Ki, Kd, base);

  const double lo2 = zeta_lo * zeta_lo;
  const double hi2 = zeta_hi * zeta_hi;
  const auto bounds = [&](double c) { return zeta_bounds(detail::r_of(t, c), t.P, t.W); };
  using Trace = std::vector<std::pair<double, double>>;
  Trace trace;
  const auto lower_ok = [&](double c, Trace& tr) {
    const double mg = bounds(c).zeta_min - lo2;
    tr.emplace_back(c, mg);
    return mg >= 0.0;
  };
  const auto upper_ok = [&](double c, Trace& tr) {
    const double mg = hi2 - bounds(c).zeta_max;
    tr.emplace_back(c, mg);
    return mg >= 0.0;
  };

  const auto infeasible = [&](double c_best, const std::string& why) {
    TuningResult best;
    best.gains = Gains{std::max(c_best, opt.c_floor) * base, Ki, Kd};
    best = verify_gains(model, eq, best.gains, target, opt);
    best.search_trace = trace;
    best.feasible = false;
    std::ostringstream os;
    os << why << "; achievable zeta in [" << std::sqrt(best.report.zeta.zeta_min) << ", "
       << std::sqrt(best.report.zeta.zeta_max) << "] at Kp scale " << c_best;
    throw InfeasibleError(best, os.str());
  };

  // Smallest c meeting the lower constraint.
  double c_lo = 0.0;
  if (!lower_ok(0.0, trace)) {
    double hi = 1.0;
    while (!lower_ok(hi, trace)) {
      hi *= 2.0;
      if (hi > opt.c_max) {
        infeasible(opt.c_max, "damping band infeasible: zeta_min stays below zeta_lo^2 up to "
                              "the Kp scale limit");
      }
    }
    c_lo = detail::bisect_first_true(lower_ok, hi == 1.0 ? 0.0 : 0.5 * hi, hi, opt, trace);
  }

  // Largest c meeting the upper constraint.
  std::optional<double> c_hi;
  if (!upper_ok(c_lo, trace)) {
    infeasible(c_lo, "damping band infeasible: empty intersection of the zeta constraints");
  }
  if (!upper_ok(opt.c_max, trace)) {
    double lo = c_lo;
    double hi = std::max(2.0 * c_lo, 1.0);
    while (upper_ok(hi, trace)) {
      lo = hi;
      hi *= 2.0;
    }
    hi = std::min(hi, opt.c_max);
    c_hi = detail::bisect_last_true(upper_ok, lo, hi, opt, trace);
  }

  double c = c_hi ? 0.5 * (c_lo + *c_hi) : c_lo;
  c = std::max(c, opt.c_floor);
  TuningResult res = verify_gains(model, eq, Gains{c * base, Ki, Kd}, target, opt);
  res.search_trace = std::move(trace);
  if (!res.feasible) {
    // c_floor pushed c outside [c_lo, c_hi]
    infeasible(c, "damping band infeasible at the minimum admissible Kp scale");
  }
  return res;
}

/// Raises Ki = s · Ki_seed until the rise-time bound t_ru ≤ t_r_max, re-running
/// the companion rule (no overshoot or damping band) for Kp at every step.
/// The trace records (s, t_ru).
inline TuningResult tune_rise_time(const MechanicalModel& model, const Equilibrium& eq,
                                   double t_r_max, TuningMode companion_mode,
                                   const Mat& Ki_seed, const Mat& Kd,
                                   const std::optional<Mat>& base_Kp = std::nullopt,
                                   std::optional<std::pair<double, double>> band = std::nullopt,
                                   const TuningOptions& opt = {}) {
  if (!(t_r_max > 0.0)) {
    throw Error(ErrorKind::InvalidArgument, "tune_rise_time: t_r_max must be positive");
  }
  if (companion_mode != TuningMode::NoOvershoot && companion_mode != TuningMode::DampingBand) {
    throw Error(ErrorKind::InvalidArgument,
                "tune_rise_time: companion must be NoOvershoot or DampingBand");
  }
  if (companion_mode == TuningMode::DampingBand && !band) {
    throw Error(ErrorKind::InvalidArgument, "tune_rise_time: damping band companion needs a band");
  }
  detail::check_seed(Ki_seed, model.m, "Ki_seed", true);

  TuningTarget target;
  target.t_r_max = t_r_max;
  if (companion_mode == TuningMode::NoOvershoot) {
    target.mode = TuningMode::RiseTime;
  } else {
    target.mode = TuningMode::Combined;
    target.zeta_lo = band->first;
    target.zeta_hi = band->second;
  }

  std::vector<std::pair<double, double>> trace;
  std::vector<std::string> warnings;
  std::optional<TuningResult> best;
  double s = 1.0;
  for (int it = 0; it <= opt.rise_iteration_cap; ++it) {
    const Mat Ki = s * Ki_seed;
    TuningResult companion;
    if (companion_mode == TuningMode::NoOvershoot) {
      companion = tune_no_overshoot(model, eq, Ki, Kd, base_Kp, opt);
    } else {
      companion = tune_damping_band(model, eq, band->first, band->second, Ki, Kd, base_Kp, opt);
    }
    const double t_ru = companion.report.rise.t_ru;
    trace.emplace_back(s, t_ru);
    for (auto& w : companion.warnings) warnings.push_back(std::move(w));

    if (!best || t_ru < best->report.rise.t_ru) best = companion;
    if (t_ru <= t_r_max * (1.0 + opt.t_r_rel_slack)) {
      TuningResult res = verify_gains(model, eq, companion.gains, target, opt);
      res.search_trace = std::move(trace);
      res.warnings = std::move(warnings);
      res.iterations = it;
      return res;
    }
    if (s >= opt.ki_scale_max) break;
    // Under the no-overshoot companion Kp grows like √Ki, so t_ru ∝ 1/√s.
    const double ratio = t_ru / t_r_max;
    const double step = std::clamp(1.01 * ratio * ratio, 1.05, 10.0);
    s = std::min(s * step, opt.ki_scale_max);
  }

  TuningResult res = verify_gains(model, eq, best->gains, target, opt);
  res.search_trace = std::move(trace);
  res.warnings = std::move(warnings);
  res.iterations = static_cast<int>(res.search_trace.size());
  res.feasible = false;
  std::ostringstream os;
  os << "rise-time target " << t_r_max << " s not reached; best t_ru = "
     << res.report.rise.t_ru << " s";
  throw InfeasibleError(res, os.str());
}

/// Dispatches on target.mode using the target's seeds (base_Ki required).
inline TuningResult tune(const MechanicalModel& model, const Equilibrium& eq,
                         const TuningTarget& target, const TuningOptions& opt = {}) {
  target.validate();
  if (!target.base_Ki) {
    throw Error(ErrorKind::InvalidArgument, "tuning needs a Ki seed (base_Ki)");
  }
  const Mat Kd = target.base_Kd.value_or(Mat::Zero(model.m, model.m));
  switch (target.mode) {
    case TuningMode::NoOvershoot:
      return tune_no_overshoot(model, eq, *target.base_Ki, Kd, target.base_Kp, opt);
    case TuningMode::DampingBand:
      return tune_damping_band(model, eq, *target.zeta_lo, *target.zeta_hi,
                               *target.base_Ki, Kd, target.base_Kp, opt);
    case TuningMode::RiseTime:
      return tune_rise_time(model, eq, *target.t_r_max, TuningMode::NoOvershoot,
                            *target.base_Ki, Kd, target.base_Kp, std::nullopt, opt);
    case TuningMode::Combined:
      return tune_rise_time(model, eq, *target.t_r_max, TuningMode::DampingBand,
                            *target.base_Ki, Kd, target.base_Kp,
                            std::make_pair(*target.zeta_lo, *target.zeta_hi), opt);
  }
  throw Error(ErrorKind::InvalidArgument, "unknown tuning mode");
}

}  // namespace phtune
