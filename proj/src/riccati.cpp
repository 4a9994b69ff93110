#include "crsn/riccati.hpp"

#include <cmath>
#include <string>

#include "crsn/rates.hpp"

namespace crsn {

RiccatiOp::RiccatiOp(const LtiSystem& sys, double theta)
    : a_(sys.A()), c_(sys.C()), q_(sys.Q()), theta_(theta) {
  if (!(theta > 0.0 && theta <= 1.0)) throw Error(ErrorCode::kInvalidInput, "theta must lie in (0, 1]");
}

RiccatiOp::RiccatiOp(const LtiSystem& sys, double theta, const SymMatrix& w) : RiccatiOp(sys, theta) {
  if (w.dim() != sys.m()) throw Error(ErrorCode::kDimensionMismatch, "W must be m x m");
  set_information(w.inverse());
}

RiccatiOp RiccatiOp::from_information(const LtiSystem& sys, double theta, const SymMatrix& w_inv) {
  if (w_inv.dim() != sys.m()) throw Error(ErrorCode::kDimensionMismatch, "W^{-1} must be m x m");
  if (!is_psd(w_inv)) throw Error(ErrorCode::kInvalidInput, "W^{-1} must be PSD");
  RiccatiOp op(sys, theta);
  op.set_information(w_inv);
  return op;
}

void RiccatiOp::set_information(const SymMatrix& w_inv) {
  w_inv_ = w_inv;
  w_inv_root_ = psd_sqrt(w_inv).mat();
}

SymMatrix RiccatiOp::apply(const SymMatrix& x) const {
  const Matrix ax = a_ * x.mat();
  const Matrix axat = ax * a_.transpose();
  const Matrix jc = w_inv_root_ * c_;  // J^{1/2} C
  Matrix inner = jc * x.mat() * jc.transpose();
  inner.diagonal().array() += 1.0;
  const Matrix b = jc * ax.transpose();  // J^{1/2} C X A^T
  const Matrix corr = b.transpose() * inner.llt().solve(b);
  return SymMatrix(axat + q_.mat() - theta_ * corr);
}

SymMatrix h(const LtiSystem& sys, const SymMatrix& x) {
  return SymMatrix(sys.A() * x.mat() * sys.A().transpose() + sys.Q().mat());
}

SymMatrix g(const RiccatiOp& op, const SymMatrix& x) { return op.apply(x); }

SymMatrix fixed_point(const RiccatiOp& op, const SymMatrix& start, FixedPointOptions opts) {
  SymMatrix x = start;
  for (int it = 0; it < opts.max_iter; ++it) {
    SymMatrix next = op.apply(x);
    const double step = (next.mat() - x.mat()).norm();
    const double scale = std::max(1.0, x.frobenius());
    if (!std::isfinite(step) || next.frobenius() > 1e14) {
      throw Error(ErrorCode::kRiccatiDivergence, "Riccati iteration diverged");
    }
    x = std::move(next);
    if (step < opts.rel_tol * scale) return x;
  }
  throw Error(ErrorCode::kRiccatiDivergence,
              "Riccati iteration did not converge in " + std::to_string(opts.max_iter) + " steps");
}

SymMatrix fixed_point(const RiccatiOp& op, const LtiSystem& sys, FixedPointOptions opts) {
  return fixed_point(op, sys.Q(), opts);
}

SymMatrix silent_information(const SymMatrix& r, const SymMatrix& trigger) {
  if (r.dim() != trigger.dim()) throw Error(ErrorCode::kDimensionMismatch, "R and trigger matrix differ in size");
  const Matrix root = psd_sqrt(trigger).mat();
  Matrix inner = root * r.mat() * root;
  inner.diagonal().array() += 1.0;
  return SymMatrix(root * inner.llt().solve(root));
}

SymMatrix blended_information(const SymMatrix& r, double lambda, double gamma, const SymMatrix& trigger) {
  if (!(gamma >= 0.0 && gamma <= lambda + 1e-12)) {
    throw Error(ErrorCode::kInvalidRate, "blend rate must lie in [0, lambda]");
  }
  gamma = std::min(gamma, lambda);
  return SymMatrix(gamma * r.inverse().mat() + (lambda - gamma) * silent_information(r, trigger).mat());
}

SymMatrix x_zero(const LtiSystem& sys, double lambda) {
  if (!(lambda > 0.0 && lambda <= 1.0)) throw Error(ErrorCode::kInvalidInput, "lambda must lie in (0, 1]");
  return fixed_point(RiccatiOp(sys, 1.0, sys.R() * (1.0 / lambda)), sys);
}

SymMatrix x_p(const LtiSystem& sys, double lambda) {
  if (!(lambda > 0.0 && lambda <= 1.0)) throw Error(ErrorCode::kInvalidInput, "lambda must lie in (0, 1]");
  const double rho = sys.spectral_radius();
  if ((1.0 - lambda) * rho * rho >= 1.0) {
    throw Error(ErrorCode::kInfeasibleLambda, "(1 - lambda) rho(A)^2 must be below 1");
  }
  const Matrix a = std::sqrt(1.0 - lambda) * sys.A();
  Matrix x = sys.Q().mat();
  for (int it = 0; it < 1000000; ++it) {
    Matrix next = a * x * a.transpose() + sys.Q().mat();
    const double step = (next - x).norm();
    x = std::move(next);
    if (step < 1e-12 * std::max(1.0, x.norm())) return SymMatrix(x);
  }
  throw Error(ErrorCode::kInfeasibleLambda, "X_p iteration did not converge");
}

namespace {

void require_feasible(const LtiSystem& sys, double lambda) {
  if (!(lambda > 0.0 && lambda <= 1.0)) throw Error(ErrorCode::kInvalidInput, "lambda must lie in (0, 1]");
  if (!feasibility_check(sys, lambda)) {
    throw Error(ErrorCode::kInfeasibleLambda, "lambda must exceed 1 - 1/rho(A)^2");
  }
}

BoundSet finish_bounds(const LtiSystem& sys, double lambda, const SymMatrix& trigger, double gamma,
                       SymMatrix x_upper) {
  BoundSet b;
  b.x_upper = std::move(x_upper);
  b.gamma = gamma;
  const SymMatrix info = blended_information(sys.R(), lambda, gamma, trigger);
  if (min_eigenvalue(info) > psd_tolerance(info)) b.r_one = info.inverse();
  b.x_lower = fixed_point(RiccatiOp::from_information(sys, 1.0, info), sys);
  b.x_zero = x_zero(sys, lambda);
  if ((1.0 - lambda) * sys.spectral_radius() * sys.spectral_radius() < 1.0) b.x_p = x_p(sys, lambda);
  if (!psd_leq(b.x_zero, b.x_lower, 1e-8)) {
    throw Error(ErrorCode::kInternal, "lower bound fell below X_0");
  }
  return b;
}

}  // namespace

BoundSet bound_set_open(const LtiSystem& sys, double lambda, const SymMatrix& y, double gamma) {
  require_feasible(sys, lambda);
  if (y.dim() != sys.m()) throw Error(ErrorCode::kDimensionMismatch, "Y must be m x m");
  if (!is_psd(y)) throw Error(ErrorCode::kInvalidInput, "Y must be PSD");
  const SymMatrix upper_info = silent_information(sys.R(), y);
  SymMatrix upper = fixed_point(RiccatiOp::from_information(sys, lambda, upper_info), sys);
  return finish_bounds(sys, lambda, y, gamma, std::move(upper));
}

BoundSet bound_set_open(const LtiSystem& sys, double lambda, const SymMatrix& y) {
  const SteadyState ss = steady_state(sys);
  return bound_set_open(sys, lambda, y, open_loop_rate(lambda, ss.Pi, y));
}

BoundSet bound_set_closed(const LtiSystem& sys, double lambda, const SymMatrix& z) {
  require_feasible(sys, lambda);
  if (z.dim() != sys.m()) throw Error(ErrorCode::kDimensionMismatch, "Z must be m x m");
  if (!is_psd(z)) throw Error(ErrorCode::kInvalidInput, "Z must be PSD");
  SymMatrix upper = fixed_point(RiccatiOp::from_information(sys, lambda, silent_information(sys.R(), z)), sys);
  const double gamma_bar = closed_loop_rate_upper(upper, z, sys, lambda);
  return finish_bounds(sys, lambda, z, gamma_bar, std::move(upper));
}

SymMatrix check_quality_bound(const LtiSystem& sys, double lambda, const SymMatrix& m) {
  require_feasible(sys, lambda);
  if (m.dim() != sys.n()) throw Error(ErrorCode::kDimensionMismatch, "M must be n x n");
  SymMatrix x0 = x_zero(sys, lambda);
  if (!psd_leq(x0, m, 1e-9)) {
    throw Error(ErrorCode::kInfeasibleQualityBound, "quality bound M must dominate X_0");
  }
  return x0;
}

}  // namespace crsn
