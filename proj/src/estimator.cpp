#include "crsn/estimator.hpp"

namespace crsn {

FilterState FilterState::from_prior(const SmallVector& x_prior, const SmallMatrix& P_prior, int m) {
  FilterState fs;
  fs.x_prior = x_prior;
  fs.P_prior = P_prior;
  fs.x_post = x_prior;
  fs.P_post = P_prior;
  fs.gain = SmallMatrix::Zero(x_prior.size(), m);
  return fs;
}

ObservationRecord ObservationRecord::observe(int eta, Epsilon sensor_decision, const SmallVector& y) {
  ObservationRecord rec;
  rec.eta = eta;
  if (eta == 0) {
    rec.epsilon = Epsilon::kAbsent;
  } else {
    rec.epsilon = sensor_decision;
    if (sensor_decision == Epsilon::kOne) rec.y = y;
  }
  return rec;
}

void ObservationRecord::validate() const {
  if (eta != 0 && eta != 1) throw Error(ErrorCode::kInvalidInput, "eta must be 0 or 1");
  if ((epsilon == Epsilon::kAbsent) != (eta == 0)) {
    throw Error(ErrorCode::kInvalidInput, "epsilon is absent exactly when the channel is busy");
  }
  if (y.has_value() != (eta == 1 && epsilon == Epsilon::kOne)) {
    throw Error(ErrorCode::kInvalidInput, "a measurement is present exactly when a packet was received");
  }
}

namespace {

enum class MeanForm { kOpen, kClosed };

// Shared measurement update. `silent_inflation` is Y^{-1} (or Z^{-1}) for the
// event-triggered laws and null for offline schedules.
FilterState update(const FilterState& fs, const ObservationRecord& obs, const SmallMatrix* silent_inflation,
                    MeanForm form, const LtiSystem& sys) {
  obs.validate();
  const PlantKernel& k = sys.kernel();
  FilterState out = fs;
  out.gain.setZero(sys.n(), sys.m());
  out.x_post = fs.x_prior;
  out.P_post = fs.P_prior;
  if (obs.eta == 0) return out;

  const bool sent = obs.epsilon == Epsilon::kOne;
  if (!sent && silent_inflation == nullptr) return out;

  const SmallMatrix cp = k.C * fs.P_prior;
  SmallMatrix innovation_cov = cp * k.C.transpose() + k.R;
  if (!sent) innovation_cov += *silent_inflation;
  Eigen::LLT<SmallMatrix> llt(innovation_cov);
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorCode::kInternal, "innovation covariance is not positive definite");
  }
  out.gain = llt.solve(cp).transpose();
  SmallMatrix p = fs.P_prior - out.gain * cp;
  out.P_post = 0.5 * (p + p.transpose());

  if (form == MeanForm::kOpen) {
    // (I - K C) xhat_prior + eps K y
    out.x_post = fs.x_prior - out.gain * (k.C * fs.x_prior);
    if (sent) out.x_post += out.gain * (*obs.y);
  } else if (sent) {
    out.x_post = fs.x_prior + out.gain * (*obs.y - k.C * fs.x_prior);
  }
  return out;
}

}  // namespace

FilterState measurement_update_open(const FilterState& fs, const ObservationRecord& obs, const TriggerParam& y_param,
                                    const LtiSystem& sys) {
  if (y_param.dim() != sys.m()) throw Error(ErrorCode::kDimensionMismatch, "Y must be m x m");
  return update(fs, obs, &y_param.small_inverse(), MeanForm::kOpen, sys);
}

FilterState measurement_update_closed(const FilterState& fs, const ObservationRecord& obs,
                                      const TriggerParam& z_param, const LtiSystem& sys) {
  if (z_param.dim() != sys.m()) throw Error(ErrorCode::kDimensionMismatch, "Z must be m x m");
  return update(fs, obs, &z_param.small_inverse(), MeanForm::kClosed, sys);
}

FilterState measurement_update_offline(const FilterState& fs, const ObservationRecord& obs, const LtiSystem& sys) {
  return update(fs, obs, nullptr, MeanForm::kClosed, sys);
}

FilterState time_update(const FilterState& fs, const LtiSystem& sys) {
  const PlantKernel& k = sys.kernel();
  FilterState out = fs;
  out.x_prior = k.A * fs.x_post;
  SmallMatrix p = k.A * fs.P_post * k.A.transpose() + k.Q;
  out.P_prior = 0.5 * (p + p.transpose());
  return out;
}

}  // namespace crsn
