#include <cmath>

#include "crsn/conic.hpp"
#include "crsn/riccati.hpp"

namespace crsn {

PsiData psi_data(const LtiSystem& sys, double lambda, bool allow_q_perturbation) {
  if (!(lambda > 0.0 && lambda <= 1.0)) throw Error(ErrorCode::kInvalidInput, "lambda must lie in (0, 1]");
  PsiData d;
  d.A = sys.A();
  d.C = sys.C();
  d.lambda = lambda;
  d.r_inv = sys.R().inverse().mat();
  const SymMatrix& q = sys.Q();
  if (min_eigenvalue(q) > psd_tolerance(q)) {
    d.q_inv = q.inverse().mat();
  } else {
    if (!allow_q_perturbation) throw Error(ErrorCode::kSingularQ, "the design block needs Q^{-1}");
    d.q_inv = (q + SymMatrix::identity(q.dim()) * 1e-9).inverse().mat();
    d.q_perturbed = true;
  }
  return d;
}

Matrix psi(const PsiData& d, const Matrix& s, const Matrix& t) {
  const auto n = d.A.rows();
  const auto m = d.C.rows();
  Matrix out = Matrix::Zero(4 * n + m, 4 * n + m);
  const Matrix sa = s * d.A;
  const Matrix crc = d.C.transpose() * d.r_inv * d.C;
  const Matrix cr = d.C.transpose() * d.r_inv;
  out.block(0, 0, n, n) = s;
  out.block(0, n, n, n) = std::sqrt(d.lambda) * sa;
  out.block(0, 2 * n, n, n) = std::sqrt(1.0 - d.lambda) * sa;
  out.block(0, 3 * n, n, n) = s;
  out.block(n, n, n, n) = s + crc;
  out.block(n, 4 * n, n, m) = cr;
  out.block(2 * n, 2 * n, n, n) = s;
  out.block(3 * n, 3 * n, n, n) = d.q_inv;
  out.block(4 * n, 4 * n, m, m) = t + d.r_inv;
  out.triangularView<Eigen::StrictlyLower>() = out.transpose().triangularView<Eigen::StrictlyLower>();
  return out;
}

BlockMap build_psi(int s_var, int t_var, const PsiData& d) {
  return [d, s_var, t_var](const VarValues& v) { return psi(d, v[s_var], v[t_var]); };
}

Matrix coupling_block(const Matrix& u, const Matrix& v) {
  const auto n = u.rows();
  Matrix out(2 * n, 2 * n);
  out << u, Matrix::Identity(n, n), Matrix::Identity(n, n), v;
  return out;
}

OpenDesign design_open(const LtiSystem& sys, double lambda, const SymMatrix& m, const SolverOptions& opts) {
  check_quality_bound(sys, lambda, m);
  const SymMatrix pi = steady_state(sys).Pi;
  const PsiData d = psi_data(sys, lambda);

  SdpProblem p;
  const int s = p.add_variable(sys.n(), "S");
  const int y = p.add_variable(sys.m(), "Y");
  const Matrix pi_m = pi.mat();
  const Matrix mm = m.mat();
  p.set_objective([=](const VarValues& v) { return (pi_m * v[y]).trace(); });
  p.add_psd_block(4 * sys.n() + sys.m(), build_psi(s, y, d), "Psi");
  p.add_psd_block(2 * sys.n(), [=](const VarValues& v) { return coupling_block(v[s], mm); }, "S-M coupling");
  p.add_psd_block(sys.m(), [=](const VarValues& v) { return v[y]; }, "Y");

  OpenDesign out;
  out.solution = solve(p, opts);
  if (out.solution.status == SdpStatus::kInfeasible) {
    throw Error(ErrorCode::kSolverInfeasible, "open-loop design problem reported infeasible");
  }
  if (out.solution.status == SdpStatus::kIterationLimit) {
    throw Error(ErrorCode::kSolverFailure, "open-loop design problem hit the iteration limit");
  }
  out.q_perturbed = d.q_perturbed;
  out.Y_star = psd_project(out.solution.value(y));
  out.S_star = out.solution.value(s);
  out.objective = (pi_m * out.Y_star.mat()).trace();
  out.psi_min_eig = min_eigenvalue(SymMatrix(psi(d, out.S_star.mat(), out.Y_star.mat())));
  out.x_upper =
      fixed_point(RiccatiOp::from_information(sys, lambda, silent_information(sys.R(), out.Y_star)), sys);
  out.quality_margin = max_eigenvalue(out.x_upper - m);
  out.rate = open_rate_report(lambda, pi, out.Y_star);
  return out;
}

ZStar solve_zstar(const LtiSystem& sys, double lambda, const SymMatrix& m, const SymMatrix& x0,
                  const SolverOptions& opts) {
  const PsiData d = psi_data(sys, lambda);
  const Matrix c = sys.C();
  const Matrix weight = c * m.mat() * c.transpose() + sys.R().mat();
  const double denom = (c * x0.mat() * c.transpose() + sys.R().mat()).trace();
  const Matrix mm = m.mat();

  SdpProblem p;
  const int s = p.add_variable(sys.n(), "S");
  const int z = p.add_variable(sys.m(), "Z");
  p.set_objective([=](const VarValues& v) { return (weight * v[z]).trace() / denom; });
  p.add_psd_block(2 * sys.n(), [=](const VarValues& v) { return coupling_block(v[s], mm); }, "S-M coupling");
  p.add_psd_block(4 * sys.n() + sys.m(), build_psi(s, z, d), "Psi");
  p.add_psd_block(sys.m(), [=](const VarValues& v) { return v[z]; }, "Z");

  ZStar out;
  out.solution = solve(p, opts);
  if (out.solution.status == SdpStatus::kInfeasible) {
    throw Error(ErrorCode::kSolverInfeasible, "z* problem reported infeasible");
  }
  if (out.solution.status == SdpStatus::kIterationLimit) {
    throw Error(ErrorCode::kSolverFailure, "z* problem hit the iteration limit");
  }
  out.S = out.solution.value(s);
  out.Z = psd_project(out.solution.value(z));
  out.value = out.solution.objective_value;
  return out;
}

}  // namespace crsn
