#pragma once

#include <stdexcept>
#include <string>

namespace phtune {

enum class ErrorKind {
  InvalidParameter,
  InvalidArgument,
  Rank,
  UnassignableEquilibrium,
  AssumptionFailure,
  Decomposition,
  Shape,
  NumericalSingularity,
  Solver,
  UndefinedRatio,
  Infeasible,
  Divergence,
  Config,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidParameter: return "invalid-parameter";
    case ErrorKind::InvalidArgument: return "invalid-argument";
    case ErrorKind::Rank: return "rank";
    case ErrorKind::UnassignableEquilibrium: return "unassignable-equilibrium";
    case ErrorKind::AssumptionFailure: return "assumption-failure";
    case ErrorKind::Decomposition: return "decomposition";
    case ErrorKind::Shape: return "shape";
    case ErrorKind::NumericalSingularity: return "numerical-singularity";
    case ErrorKind::Solver: return "solver";
    case ErrorKind::UndefinedRatio: return "undefined-ratio";
    case ErrorKind::Infeasible: return "infeasible";
    case ErrorKind::Divergence: return "divergence";
    case ErrorKind::Config: return "config";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Cholesky breakdown; `pivot()` is the zero-based index of the first
/// non-positive pivot.
class DecompositionError : public Error {
 public:
  DecompositionError(int pivot, const std::string& what)
      : Error(ErrorKind::Decomposition, what), pivot_(pivot) {}

  int pivot() const noexcept { return pivot_; }

 private:
  int pivot_;
};

/// The shaped energy has no isolated minimum at the target (P not positive
/// definite). Carries the offending smallest eigenvalue.
class AssumptionError : public Error {
 public:
  AssumptionError(double eigenvalue, const std::string& what)
      : Error(ErrorKind::AssumptionFailure, what), eigenvalue_(eigenvalue) {}

  double eigenvalue() const noexcept { return eigenvalue_; }

 private:
  double eigenvalue_;
};

class DivergenceError : public Error {
 public:
  DivergenceError(long step, const std::string& what)
      : Error(ErrorKind::Divergence, what), step_(step) {}

  long step() const noexcept { return step_; }

 private:
  long step_;
};

}  // namespace phtune
