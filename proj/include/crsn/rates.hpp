#pragma once

#include <optional>
#include <span>
#include <utility>

#include "crsn/matcore.hpp"
#include "crsn/sysmodel.hpp"

namespace crsn {

struct RateReport {
  double gamma = 0.0;                  // average communication rate
  std::optional<double> gamma_bar;     // closed-loop upper bound
  double f1 = 0.0;                     // lower sandwich function at tr(Pi Y)
  double f2 = 0.0;                     // upper sandwich function at tr(Pi Y)
  std::optional<double> kappa_bound;   // optimality-gap bound
};

/// log det(I + S T) for PSD S, T, through the symmetric matrix S^{1/2} T S^{1/2}.
double log_det_identity_plus(const SymMatrix& s, const SymMatrix& t);

/// det(I + T Z)^{-1/2} for PD T and PSD Z (Cholesky route, hot-path friendly):
/// the probability that a zero-mean N(0, T) vector does not fire the trigger Z.
double silent_probability(const SmallMatrix& t, const SmallMatrix& z);

/// gamma = lambda (1 - det(I + Pi Y)^{-1/2}).
double open_loop_rate(double lambda, const SymMatrix& pi, const SymMatrix& y);

/// (f1, f2) = (lambda (1 - (1 + x)^{-1/2}), lambda (1 - exp(-x / 2))) at x = tr(Pi Y).
std::pair<double, double> rate_sandwich(double lambda, double trace_pi_y);

/// gamma_bar = lambda (1 - det(I + (C Xbar C^T + R) Z)^{-1/2}).
double closed_loop_rate_upper(const SymMatrix& x_bar, const SymMatrix& z, const LtiSystem& sys, double lambda);

/// Time average of lambda (1 - det(I + (C P C^T + R) Z)^{-1/2}) over a trace of
/// realized prior covariances, skipping the first `burn_in` entries.
double closed_loop_rate_empirical(std::span<const SmallMatrix> p_prior_trace, const SymMatrix& z,
                                  const LtiSystem& sys, double lambda, std::size_t burn_in = 0);

/// lambda ((1 + tr(Pi Y*))^{-1/2} - det(I + Pi Y*)^{-1/2}); both factors at Y*.
double gap_open(double lambda, const SymMatrix& pi, const SymMatrix& y_star);

/// lambda ((1 + upsilon*)^{-1/2} - det(I + (C X* C^T + R) Z*)^{-1/2}).
double gap_closed(double lambda, double upsilon_star, const SymMatrix& x_star, const SymMatrix& z_star,
                  const LtiSystem& sys);

/// gamma, f1, f2 and the open-loop gap bound for (Pi, Y).
RateReport open_rate_report(double lambda, const SymMatrix& pi, const SymMatrix& y);

}  // namespace crsn
