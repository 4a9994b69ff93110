#include <cmath>
#include <complex>
#include <numbers>

#include <unsupported/Eigen/FFT>

#include "crsn/estimator.hpp"

namespace crsn {

namespace {

double scalar_of(const Matrix& m) { return m(0, 0); }

// Catmull-Rom interpolation of samples p on the uniform grid x0 + i dx; zero
// outside the grid.
double interpolate(const std::vector<double>& p, double x0, double dx, double x) {
  const double s = (x - x0) / dx;
  const auto n = static_cast<long>(p.size());
  if (s < 0.0 || s > static_cast<double>(n - 1)) return 0.0;
  const long i = std::min(static_cast<long>(std::floor(s)), n - 2);
  const double t = s - static_cast<double>(i);
  auto at = [&](long j) { return (j < 0 || j >= n) ? 0.0 : p[static_cast<std::size_t>(j)]; };
  const double p0 = at(i - 1), p1 = at(i), p2 = at(i + 1), p3 = at(i + 2);
  const double v = p1 + 0.5 * t * (p2 - p0 + t * (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3 + t * (3.0 * (p1 - p2) + p3 - p0)));
  return std::max(0.0, v);
}

double gaussian_pdf(double x, double var) {
  return std::exp(-0.5 * x * x / var) / std::sqrt(2.0 * std::numbers::pi * var);
}

}  // namespace

GridFilter::GridFilter(const LtiSystem& sys, TriggerMode mode, double trigger, double prior_variance,
                       GridOptions opts)
    : mode_(mode), trigger_(trigger), opts_(opts) {
  if (sys.n() != 1 || sys.m() != 1) throw Error(ErrorCode::kDimensionMismatch, "grid oracle needs a scalar plant");
  if (opts_.points < 3) throw Error(ErrorCode::kInvalidInput, "grid needs at least 3 points");
  if (!(trigger > 0.0)) throw Error(ErrorCode::kInvalidInput, "trigger parameter must be positive");
  if (!(prior_variance > 0.0)) throw Error(ErrorCode::kInvalidInput, "prior variance must be positive");
  a_ = scalar_of(sys.A());
  c_ = scalar_of(sys.C());
  q_ = scalar_of(sys.Q().mat());
  r_ = scalar_of(sys.R().mat());
  const double spread = sys.stable() ? scalar_of(steady_state(sys).Sigma.mat()) : prior_variance;
  const double half = opts_.half_width_sd * std::sqrt(std::max(spread, prior_variance));
  const auto n = static_cast<std::size_t>(opts_.points);
  dx_ = 2.0 * half / static_cast<double>(n - 1);
  x_.resize(n);
  p_.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    x_[i] = -half + dx_ * static_cast<double>(i);
    p_[i] = gaussian_pdf(x_[i], prior_variance);
  }
  normalize();
}

void GridFilter::normalize() {
  double mass = 0.0;
  for (double v : p_) mass += v;
  mass *= dx_;
  if (!(mass > 0.0)) throw Error(ErrorCode::kWidenGrid, "posterior mass vanished on the grid");
  for (double& v : p_) v /= mass;
}

void GridFilter::update(const ObservationRecord& obs) {
  obs.validate();
  if (obs.eta == 0) return;
  if (obs.epsilon == Epsilon::kOne) {
    const double y = (*obs.y)(0);
    for (std::size_t i = 0; i < x_.size(); ++i) p_[i] *= gaussian_pdf(y - c_ * x_[i], r_);
  } else {
    // Likelihood of staying silent: integral of exp(-w v^2 / 2) N(y; C x, R) dy,
    // with v = y (open loop) or v = y - yhat_prior (closed loop).
    const double shrink = 1.0 + r_ * trigger_;
    const double offset = mode_ == TriggerMode::kClosed ? c_ * moments().mean : 0.0;
    for (std::size_t i = 0; i < x_.size(); ++i) {
      const double v = c_ * x_[i] - offset;
      p_[i] *= std::exp(-0.5 * trigger_ * v * v / shrink) / std::sqrt(shrink);
    }
  }
  normalize();
}

void GridFilter::predict() {
  const std::size_t n = x_.size();
  const double x0 = x_.front();
  std::vector<double> pushed(n, 0.0);
  if (a_ == 0.0) {
    // x_{k+1} = w_k
    for (std::size_t i = 0; i < n; ++i) pushed[i] = gaussian_pdf(x_[i], q_);
    p_ = std::move(pushed);
    last_mass_loss_ = 0.0;
    normalize();
    return;
  }
  const double inv_a = 1.0 / std::abs(a_);
  for (std::size_t i = 0; i < n; ++i) pushed[i] = interpolate(p_, x0, dx_, x_[i] / a_) * inv_a;

  if (q_ > 1e-6 * dx_ * dx_) {
    // Linear convolution with the N(0, Q) kernel on offsets -(n-1)..(n-1).
    std::size_t size = 1;
    while (size < 3 * n) size <<= 1;
    std::vector<double> signal(size, 0.0), kernel(size, 0.0);
    std::copy(pushed.begin(), pushed.end(), signal.begin());
    for (std::size_t j = 0; j < n; ++j) {
      const double off = dx_ * static_cast<double>(j);
      kernel[j] = gaussian_pdf(off, q_) * dx_;
      if (j > 0) kernel[size - j] = kernel[j];
    }
    Eigen::FFT<double> fft;
    std::vector<std::complex<double>> fs, fk;
    fft.fwd(fs, signal);
    fft.fwd(fk, kernel);
    for (std::size_t i = 0; i < fs.size(); ++i) fs[i] *= fk[i];
    std::vector<double> conv;
    fft.inv(conv, fs);
    for (std::size_t i = 0; i < n; ++i) pushed[i] = std::max(0.0, conv[i]);
  }
  double mass = 0.0;
  for (double v : pushed) mass += v;
  mass *= dx_;
  last_mass_loss_ = std::max(0.0, 1.0 - mass);
  if (last_mass_loss_ > opts_.max_mass_loss) {
    throw Error(ErrorCode::kWidenGrid, "grid lost " + std::to_string(last_mass_loss_) + " of its mass");
  }
  p_ = std::move(pushed);
  normalize();
}

GridMoments GridFilter::moments() const {
  double mean = 0.0;
  for (std::size_t i = 0; i < x_.size(); ++i) mean += x_[i] * p_[i];
  mean *= dx_;
  double m2 = 0.0, m4 = 0.0;
  for (std::size_t i = 0; i < x_.size(); ++i) {
    const double d = x_[i] - mean;
    const double d2 = d * d;
    m2 += d2 * p_[i];
    m4 += d2 * d2 * p_[i];
  }
  m2 *= dx_;
  m4 *= dx_;
  return {mean, m2, m4 / (m2 * m2) - 3.0};
}

GridMoments grid_oracle_posterior(std::span<const ObservationRecord> history, const LtiSystem& sys,
                                  TriggerMode mode, double trigger, double prior_variance, GridOptions opts) {
  GridFilter filter(sys, mode, trigger, prior_variance, opts);
  for (std::size_t k = 0; k < history.size(); ++k) {
    if (k > 0) filter.predict();
    filter.update(history[k]);
  }
  return filter.moments();
}

}  // namespace crsn
