#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace crsn {

enum class ErrorCode {
  kInvalidInput,
  kDimensionMismatch,
  kUnstablePlant,
  kRiccatiDivergence,
  kIllConditionedTrigger,
  kInfeasibleLambda,
  kInfeasibleQualityBound,
  kSingularQ,
  kWidenGrid,
  kInvalidRate,
  kDomain,
  kConfig,
  kSolverInfeasible,
  kSolverFailure,
  kEmptyTrace,
  kInternal,
};

/// Stable kebab-case name, e.g. "riccati-divergence".
std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidInput: return "invalid-input";
    case ErrorCode::kDimensionMismatch: return "dimension-mismatch";
    case ErrorCode::kUnstablePlant: return "unstable-plant";
    case ErrorCode::kRiccatiDivergence: return "riccati-divergence";
    case ErrorCode::kIllConditionedTrigger: return "ill-conditioned-trigger";
    case ErrorCode::kInfeasibleLambda: return "infeasible-lambda";
    case ErrorCode::kInfeasibleQualityBound: return "infeasible-quality-bound";
    case ErrorCode::kSingularQ: return "singular-Q";
    case ErrorCode::kWidenGrid: return "widen-grid";
    case ErrorCode::kInvalidRate: return "invalid-rate";
    case ErrorCode::kDomain: return "domain";
    case ErrorCode::kConfig: return "config";
    case ErrorCode::kSolverInfeasible: return "solver-infeasible";
    case ErrorCode::kSolverFailure: return "solver-failure";
    case ErrorCode::kEmptyTrace: return "empty-trace";
    case ErrorCode::kInternal: return "internal";
  }
  return "unknown";
}

}  // namespace crsn
