#include "crsn/rates.hpp"

#include <cmath>

namespace crsn {

namespace {

void check_lambda(double lambda) {
  if (!(lambda > 0.0 && lambda <= 1.0)) throw Error(ErrorCode::kInvalidInput, "lambda must lie in (0, 1]");
}

SymMatrix innovation_cov(const SymMatrix& x, const LtiSystem& sys) {
  return SymMatrix(sys.C() * x.mat() * sys.C().transpose() + sys.R().mat());
}

}  // namespace

double log_det_identity_plus(const SymMatrix& s, const SymMatrix& t) {
  if (s.dim() != t.dim()) throw Error(ErrorCode::kDimensionMismatch, "det(I + S T)");
  const SymMatrix root = psd_sqrt(s);
  const Vector mu = eigenvalues(SymMatrix(root.mat() * t.mat() * root.mat()));
  double acc = 0.0;
  for (Eigen::Index i = 0; i < mu.size(); ++i) acc += std::log1p(std::max(0.0, mu(i)));
  return acc;
}

double silent_probability(const SmallMatrix& t, const SmallMatrix& z) {
  if (t.rows() == 1) return 1.0 / std::sqrt(1.0 + t(0, 0) * z(0, 0));
  Eigen::LLT<SmallMatrix> llt(t);
  const SmallMatrix l = llt.matrixL();
  SmallMatrix inner = l.transpose() * z * l;
  inner.diagonal().array() += 1.0;
  Eigen::LLT<SmallMatrix> inner_llt(inner);
  // det(inner)^{-1/2} = 1 / prod(diag(L_inner))
  return 1.0 / inner_llt.matrixL().toDenseMatrix().diagonal().prod();
}

double open_loop_rate(double lambda, const SymMatrix& pi, const SymMatrix& y) {
  check_lambda(lambda);
  return -lambda * std::expm1(-0.5 * log_det_identity_plus(pi, y));
}

std::pair<double, double> rate_sandwich(double lambda, double trace_pi_y) {
  check_lambda(lambda);
  if (trace_pi_y < 0.0) throw Error(ErrorCode::kInvalidInput, "tr(Pi Y) must be non-negative");
  const double f1 = lambda * (1.0 - 1.0 / std::sqrt(1.0 + trace_pi_y));
  const double f2 = -lambda * std::expm1(-0.5 * trace_pi_y);
  return {f1, f2};
}

double closed_loop_rate_upper(const SymMatrix& x_bar, const SymMatrix& z, const LtiSystem& sys, double lambda) {
  check_lambda(lambda);
  return -lambda * std::expm1(-0.5 * log_det_identity_plus(innovation_cov(x_bar, sys), z));
}

double closed_loop_rate_empirical(std::span<const SmallMatrix> p_prior_trace, const SymMatrix& z,
                                  const LtiSystem& sys, double lambda, std::size_t burn_in) {
  check_lambda(lambda);
  if (p_prior_trace.size() <= burn_in) throw Error(ErrorCode::kEmptyTrace, "no covariance samples after burn-in");
  const PlantKernel& k = sys.kernel();
  const SmallMatrix zs = z.mat();
  double acc = 0.0;
  for (std::size_t i = burn_in; i < p_prior_trace.size(); ++i) {
    const SmallMatrix t = k.C * p_prior_trace[i] * k.C.transpose() + k.R;
    acc += 1.0 - silent_probability(t, zs);
  }
  return lambda * acc / static_cast<double>(p_prior_trace.size() - burn_in);
}

double gap_open(double lambda, const SymMatrix& pi, const SymMatrix& y_star) {
  check_lambda(lambda);
  const double tr = (pi.mat() * y_star.mat()).trace();
  return lambda * (1.0 / std::sqrt(1.0 + std::max(0.0, tr)) - std::exp(-0.5 * log_det_identity_plus(pi, y_star)));
}

double gap_closed(double lambda, double upsilon_star, const SymMatrix& x_star, const SymMatrix& z_star,
                  const LtiSystem& sys) {
  check_lambda(lambda);
  return lambda * (1.0 / std::sqrt(1.0 + upsilon_star) -
                   std::exp(-0.5 * log_det_identity_plus(innovation_cov(x_star, sys), z_star)));
}

RateReport open_rate_report(double lambda, const SymMatrix& pi, const SymMatrix& y) {
  RateReport rep;
  rep.gamma = open_loop_rate(lambda, pi, y);
  const auto [f1, f2] = rate_sandwich(lambda, std::max(0.0, (pi.mat() * y.mat()).trace()));
  rep.f1 = f1;
  rep.f2 = f2;
  rep.kappa_bound = gap_open(lambda, pi, y);
  return rep;
}

}  // namespace crsn
