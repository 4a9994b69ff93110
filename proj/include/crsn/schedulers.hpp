#pragma once

#include <cstdint>

#include "crsn/matcore.hpp"
#include "crsn/random.hpp"

namespace crsn {

enum class TriggerMode { kOpen, kClosed };

/// Positive definite event matrix: Y for the open-loop law (tested on the raw
/// measurement), Z for the closed-loop law (tested on the innovation).
class TriggerParam {
 public:
  /// Throws invalid-input unless `matrix` is PD, and ill-conditioned-trigger
  /// when cond(matrix) > 1e12.
  TriggerParam(SymMatrix matrix, TriggerMode mode);

  const SymMatrix& matrix() const { return matrix_; }
  TriggerMode mode() const { return mode_; }
  int dim() const { return matrix_.dim(); }
  /// R + matrix^{-1}, the effective noise of a silent-but-free step.
  SymMatrix inflated_noise(const SymMatrix& r) const;
  const SmallMatrix& small() const { return small_; }
  const SmallMatrix& small_inverse() const { return small_inv_; }

 private:
  SymMatrix matrix_;
  TriggerMode mode_;
  SmallMatrix small_;
  SmallMatrix small_inv_;
};

/// The transmission decision epsilon_k; kAbsent when the channel was busy
/// and the decision is unobservable at the estimator.
enum class Epsilon : std::int8_t { kZero = 0, kOne = 1, kAbsent = -1 };

struct TriggerDecision {
  Epsilon epsilon = Epsilon::kZero;
  double zeta = 0.0;  // uniform draw, kept for audit; 0 for deterministic schedulers
};

/// Pr(epsilon = 1 | v) = 1 - exp(-v^T M v / 2).
double trigger_probability(const SmallVector& v, const SmallMatrix& m);

/// epsilon = 1 iff zeta > exp(-y^T Y y / 2), zeta ~ U(0, 1).
TriggerDecision trigger_open(const SmallVector& y, const TriggerParam& y_param, RandomSource& rng);
/// Same law applied to the innovation z = y - C xhat_prior.
TriggerDecision trigger_closed(const SmallVector& z, const TriggerParam& z_param, RandomSource& rng);
/// Sends with probability rate / lambda, independent of the plant.
TriggerDecision trigger_random_offline(double rate, double lambda, RandomSource& rng);
/// Maximally even pattern with density rate / lambda:
/// epsilon_k = 1 iff floor((k + phase + 1) r) > floor((k + phase) r).
TriggerDecision trigger_periodic_offline(std::uint64_t step, double rate, double lambda,
                                         std::uint64_t phase = 0);

}  // namespace crsn
