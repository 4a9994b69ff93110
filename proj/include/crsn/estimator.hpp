#pragma once

#include <optional>
#include <span>
#include <vector>

#include "crsn/matcore.hpp"
#include "crsn/schedulers.hpp"
#include "crsn/sysmodel.hpp"

namespace crsn {

/// Remote estimator state. Covariances are kept symmetric.
struct FilterState {
  SmallVector x_prior;  // E[x_k | I_{k-1}]
  SmallMatrix P_prior;
  SmallVector x_post;   // E[x_k | I_k]
  SmallMatrix P_post;
  SmallMatrix gain;     // K_k, zero when the channel was busy

  /// Prior (x_prior, P_prior) with the posterior fields mirroring it.
  static FilterState from_prior(const SmallVector& x_prior, const SmallMatrix& P_prior, int m);
};

/// What the estimator learns at step k: channel state eta, the transmission
/// decision epsilon (unobservable when eta = 0) and y when a packet arrived.
struct ObservationRecord {
  int eta = 0;
  Epsilon epsilon = Epsilon::kAbsent;
  std::optional<SmallVector> y;

  /// Builds the record the estimator sees from the raw sensor/channel outcome.
  static ObservationRecord observe(int eta, Epsilon sensor_decision, const SmallVector& y);
  /// Throws invalid-input unless y is present iff eta = 1 and epsilon = 1, and
  /// epsilon is absent iff eta = 0.
  void validate() const;
};

/// Open-loop MMSE update: K = eta P C^T (C P C^T + R + (1 - eps) Y^{-1})^{-1},
/// xhat = (I - K C) xhat_prior + eps K y, P = P_prior - K C P_prior.
FilterState measurement_update_open(const FilterState& fs, const ObservationRecord& obs, const TriggerParam& y_param,
                                    const LtiSystem& sys);
/// Closed-loop MMSE update: same gain with Z, xhat = xhat_prior + eps K (y - C xhat_prior).
FilterState measurement_update_closed(const FilterState& fs, const ObservationRecord& obs,
                                      const TriggerParam& z_param, const LtiSystem& sys);
/// Offline (state-independent) schedules: a silent step carries no information,
/// so only received packets update the estimate.
FilterState measurement_update_offline(const FilterState& fs, const ObservationRecord& obs, const LtiSystem& sys);
/// xhat_prior <- A xhat, P_prior <- A P A^T + Q.
FilterState time_update(const FilterState& fs, const LtiSystem& sys);

// --- Grid-based exact Bayesian filter for scalar plants ------------------------

struct GridMoments {
  double mean = 0.0;
  double variance = 0.0;
  double excess_kurtosis = 0.0;
};

struct GridOptions {
  int points = 4001;
  double half_width_sd = 8.0;  // grid covers +-half_width_sd * sqrt(Sigma)
  double max_mass_loss = 1e-6;
};

/// Brute-force posterior density on a uniform grid. Prediction pushes the
/// density through x -> A x and convolves with N(0, Q) (FFT); updates multiply
/// by the exact likelihood of the observation record, including the closed-form
/// likelihood of a silent step.
class GridFilter {
 public:
  GridFilter(const LtiSystem& sys, TriggerMode mode, double trigger, double prior_variance,
             GridOptions opts = {});

  void update(const ObservationRecord& obs);
  void predict();
  GridMoments moments() const;
  double mass_loss() const { return last_mass_loss_; }
  const std::vector<double>& grid() const { return x_; }
  const std::vector<double>& density() const { return p_; }

 private:
  void normalize();

  double a_, c_, q_, r_;
  TriggerMode mode_;
  double trigger_;
  GridOptions opts_;
  std::vector<double> x_;
  std::vector<double> p_;
  double dx_ = 0.0;
  double last_mass_loss_ = 0.0;
};

/// Runs the grid filter over `history` (a measurement update per record, with a
/// prediction between consecutive records) and returns the moments of the
/// final posterior p(x_K | I_K).
GridMoments grid_oracle_posterior(std::span<const ObservationRecord> history, const LtiSystem& sys,
                                  TriggerMode mode, double trigger, double prior_variance,
                                  GridOptions opts = {});

}  // namespace crsn
