#pragma once

#include <optional>

#include "crsn/matcore.hpp"
#include "crsn/schedulers.hpp"
#include "crsn/sysmodel.hpp"

namespace crsn {

/// g_{theta,W}(X) = A X A^T + Q - theta A X C^T (C X C^T + W)^{-1} C X A^T.
///
/// The operator keeps W in information form, W^{-1}, and evaluates
/// (C X C^T + W)^{-1} = J^{1/2} (I + J^{1/2} C X C^T J^{1/2})^{-1} J^{1/2} with
/// J = W^{-1}. This stays well defined when J is only PSD (a direction of
/// infinite noise, e.g. a trigger matrix with a zero eigenvalue).
class RiccatiOp {
 public:
  /// W must be positive definite.
  RiccatiOp(const LtiSystem& sys, double theta, const SymMatrix& w);
  /// W^{-1} given directly; only PSD is required.
  static RiccatiOp from_information(const LtiSystem& sys, double theta, const SymMatrix& w_inv);

  double theta() const { return theta_; }
  const SymMatrix& w_information() const { return w_inv_; }
  SymMatrix apply(const SymMatrix& x) const;

 private:
  RiccatiOp(const LtiSystem& sys, double theta);
  void set_information(const SymMatrix& w_inv);

  Matrix a_, c_;
  SymMatrix q_;
  double theta_;
  SymMatrix w_inv_;
  Matrix w_inv_root_;
};

struct FixedPointOptions {
  double rel_tol = 1e-11;
  int max_iter = 100000;
};

/// A X A^T + Q.
SymMatrix h(const LtiSystem& sys, const SymMatrix& x);
SymMatrix g(const RiccatiOp& op, const SymMatrix& x);

/// Iterates X <- g(X) from `start` until ||X_{k+1} - X_k||_F < rel_tol max(1, ||X_k||_F).
/// Throws riccati-divergence when the iteration blows up or runs out of steps.
SymMatrix fixed_point(const RiccatiOp& op, const SymMatrix& start, FixedPointOptions opts = {});
/// Starts from Q.
SymMatrix fixed_point(const RiccatiOp& op, const LtiSystem& sys, FixedPointOptions opts = {});

/// (R + T^{-1})^{-1} for a PSD trigger matrix T, as T^{1/2} (I + T^{1/2} R T^{1/2})^{-1} T^{1/2}.
SymMatrix silent_information(const SymMatrix& r, const SymMatrix& trigger);
/// R_1^{-1} = gamma R^{-1} + (lambda - gamma) (R + T^{-1})^{-1}.
SymMatrix blended_information(const SymMatrix& r, double lambda, double gamma, const SymMatrix& trigger);

struct BoundSet {
  SymMatrix x_upper;              // fixed point of g_{lambda, R + T^{-1}}
  SymMatrix x_lower;              // fixed point of g_{1, R_1}
  SymMatrix x_zero;               // fixed point of g_{1, R / lambda}
  std::optional<SymMatrix> x_p;   // fixed point of X = (1 - lambda) A X A^T + Q
  std::optional<SymMatrix> r_one; // absent when R_1^{-1} is singular
  double gamma = 0.0;             // rate used in the blend
};

/// Fixed point of g_{1, R / lambda}: no schedule achieves a smaller mean covariance.
SymMatrix x_zero(const LtiSystem& sys, double lambda);

/// Fixed point of X = (1 - lambda) A X A^T + Q. Throws infeasible-lambda unless
/// (1 - lambda) rho(A)^2 < 1.
SymMatrix x_p(const LtiSystem& sys, double lambda);

/// Upper/lower mean-covariance bounds of the open-loop scheduler with trigger Y
/// (PSD) at average rate `gamma`.
BoundSet bound_set_open(const LtiSystem& sys, double lambda, const SymMatrix& y, double gamma);
/// Same with gamma taken from the stationary open-loop rate formula.
BoundSet bound_set_open(const LtiSystem& sys, double lambda, const SymMatrix& y);

/// Closed-loop bounds; the blend uses the rate upper bound evaluated at x_upper.
BoundSet bound_set_closed(const LtiSystem& sys, double lambda, const SymMatrix& z);

/// Throws infeasible-lambda when lambda <= 1 - 1/rho(A)^2, and
/// infeasible-quality-bound unless X_0 <= M. Returns X_0.
SymMatrix check_quality_bound(const LtiSystem& sys, double lambda, const SymMatrix& m);

}  // namespace crsn
