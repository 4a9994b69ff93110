#include "crsn/schedulers.hpp"

#include <cmath>
#include <string>

namespace crsn {

TriggerParam::TriggerParam(SymMatrix matrix, TriggerMode mode) : matrix_(std::move(matrix)), mode_(mode) {
  if (matrix_.dim() == 0 || matrix_.dim() > kMaxFilterDim) {
    throw Error(ErrorCode::kDimensionMismatch, "trigger matrix dimension out of range");
  }
  if (min_eigenvalue(matrix_) <= 0.0) {
    throw Error(ErrorCode::kInvalidInput, "trigger matrix must be positive definite");
  }
  const double cond = condition_number(matrix_);
  if (cond > 1e12) {
    throw Error(ErrorCode::kIllConditionedTrigger, "cond(trigger matrix) = " + std::to_string(cond));
  }
  small_ = matrix_.mat();
  small_inv_ = matrix_.inverse().mat();
}

SymMatrix TriggerParam::inflated_noise(const SymMatrix& r) const {
  if (r.dim() != dim()) throw Error(ErrorCode::kDimensionMismatch, "R vs trigger matrix");
  return r + matrix_.inverse();
}

double trigger_probability(const SmallVector& v, const SmallMatrix& m) {
  return -std::expm1(-0.5 * v.dot(m * v));
}

namespace {

TriggerDecision stochastic_trigger(const SmallVector& v, const TriggerParam& p, RandomSource& rng) {
  if (v.size() != p.dim()) throw Error(ErrorCode::kDimensionMismatch, "trigger input vs matrix");
  TriggerDecision d;
  d.zeta = rng.uniform();
  d.epsilon = d.zeta > std::exp(-0.5 * v.dot(p.small() * v)) ? Epsilon::kOne : Epsilon::kZero;
  return d;
}

void check_rate(double rate, double lambda) {
  if (!(lambda > 0.0 && lambda <= 1.0)) throw Error(ErrorCode::kInvalidInput, "lambda must lie in (0, 1]");
  if (rate < 0.0 || rate > lambda) {
    throw Error(ErrorCode::kInvalidRate, "rate " + std::to_string(rate) + " outside [0, lambda]");
  }
}

}  // namespace

TriggerDecision trigger_open(const SmallVector& y, const TriggerParam& y_param, RandomSource& rng) {
  if (y_param.mode() != TriggerMode::kOpen) throw Error(ErrorCode::kInvalidInput, "expected an open-loop Y");
  return stochastic_trigger(y, y_param, rng);
}

TriggerDecision trigger_closed(const SmallVector& z, const TriggerParam& z_param, RandomSource& rng) {
  if (z_param.mode() != TriggerMode::kClosed) throw Error(ErrorCode::kInvalidInput, "expected a closed-loop Z");
  return stochastic_trigger(z, z_param, rng);
}

TriggerDecision trigger_random_offline(double rate, double lambda, RandomSource& rng) {
  check_rate(rate, lambda);
  TriggerDecision d;
  d.zeta = rng.uniform();
  d.epsilon = d.zeta < rate / lambda ? Epsilon::kOne : Epsilon::kZero;
  return d;
}

TriggerDecision trigger_periodic_offline(std::uint64_t step, double rate, double lambda, std::uint64_t phase) {
  check_rate(rate, lambda);
  if (rate <= 0.0) throw Error(ErrorCode::kInvalidRate, "periodic schedule needs a positive rate");
  const double r = rate / lambda;
  const auto k = static_cast<double>(step + phase);
  TriggerDecision d;
  d.epsilon = std::floor((k + 1.0) * r) > std::floor(k * r) ? Epsilon::kOne : Epsilon::kZero;
  return d;
}

}  // namespace crsn
