#pragma once

// Randomized property sweeps shared by the unit tests and the acceptance run.
// Each returns the number of instances that violate the property.

#include <algorithm>
#include <cmath>

#include "generators.hpp"

#include "crsn/rates.hpp"
#include "crsn/riccati.hpp"

namespace crsn::testing {

struct OperatorInstance {
  LtiSystem sys;
  double theta;
  SymMatrix w;
};

// Plants with rho(A) up to 1.2 and theta kept 0.1 above the feasibility edge.
// Unstable plants get a square C so that the edge is the true critical value.
inline OperatorInstance operator_instance(Gen& gen) {
  const int n = gen.integer(1, 4);
  const double rho = gen.uniform(0.2, 1.2);
  const int m = rho < 1.0 ? gen.integer(1, 3) : n;
  Matrix a = gen.matrix(n, n);
  a *= rho / std::max(spectral_radius(a), 1e-12);
  LtiSystem sys(a, gen.matrix(m, n), gen.pd(n), gen.pd(m));
  const double edge = std::max(0.0, 1.0 - 1.0 / (rho * rho));
  return {std::move(sys), gen.uniform(std::min(edge + 0.1, 1.0), 1.0), gen.pd(m, gen.log_uniform(0.1, 10.0))};
}

inline double leq_slack(const SymMatrix& a, const SymMatrix& b) {
  return 1e-9 * std::max({1.0, a.frobenius(), b.frobenius()});
}

inline int sandwich_violations(int count, std::uint64_t seed) {
  Gen gen(seed);
  int bad = 0;
  for (int t = 0; t < count; ++t) {
    const int m = gen.integer(1, 4);
    const SymMatrix pi = gen.pd(m, gen.log_uniform(0.1, 10.0));
    const SymMatrix y = gen.psd(m, gen.log_uniform(1e-3, 10.0));
    const double lambda = gen.uniform(0.05, 1.0);
    const double gamma = open_loop_rate(lambda, pi, y);
    const auto [f1, f2] = rate_sandwich(lambda, (pi.mat() * y.mat()).trace());
    if (!(f1 <= gamma + 1e-12 && gamma <= f2 + 1e-12)) ++bad;
  }
  return bad;
}

inline int monotone_violations(int count, std::uint64_t seed) {
  Gen gen(seed);
  int bad = 0;
  for (int t = 0; t < count; ++t) {
    const OperatorInstance in = operator_instance(gen);
    const RiccatiOp op(in.sys, in.theta, in.w);
    const SymMatrix x1 = gen.psd(in.sys.n(), gen.log_uniform(0.1, 10.0));
    const SymMatrix x2 = x1 + gen.psd(in.sys.n(), gen.log_uniform(0.01, 10.0));
    const SymMatrix g1 = op.apply(x1), g2 = op.apply(x2);
    if (!psd_leq(g1, g2, leq_slack(g1, g2))) ++bad;
  }
  return bad;
}

inline int concavity_violations(int count, std::uint64_t seed) {
  Gen gen(seed);
  int bad = 0;
  for (int t = 0; t < count; ++t) {
    const OperatorInstance in = operator_instance(gen);
    const RiccatiOp op(in.sys, in.theta, in.w);
    const SymMatrix x1 = gen.psd(in.sys.n(), gen.log_uniform(0.1, 10.0));
    const SymMatrix x2 = gen.psd(in.sys.n(), gen.log_uniform(0.1, 10.0));
    const double alpha = gen.uniform(0.0, 1.0);
    const SymMatrix mid = op.apply(alpha * x1 + (1.0 - alpha) * x2);
    const SymMatrix chord = alpha * op.apply(x1) + (1.0 - alpha) * op.apply(x2);
    if (!psd_leq(chord, mid, leq_slack(chord, mid))) ++bad;
  }
  return bad;
}

inline int w_monotone_violations(int count, std::uint64_t seed) {
  Gen gen(seed);
  int bad = 0;
  for (int t = 0; t < count; ++t) {
    const OperatorInstance in = operator_instance(gen);
    const SymMatrix w_big = in.w + gen.psd(in.sys.m(), gen.log_uniform(0.01, 10.0));
    const SymMatrix x = gen.psd(in.sys.n(), gen.log_uniform(0.1, 10.0));
    const SymMatrix lo = RiccatiOp(in.sys, in.theta, in.w).apply(x);
    const SymMatrix hi = RiccatiOp(in.sys, in.theta, w_big).apply(x);
    if (!psd_leq(lo, hi, leq_slack(lo, hi))) ++bad;
  }
  return bad;
}

inline int start_dependence_violations(int count, std::uint64_t seed) {
  Gen gen(seed);
  int bad = 0;
  for (int t = 0; t < count; ++t) {
    const OperatorInstance in = operator_instance(gen);
    const RiccatiOp op(in.sys, in.theta, in.w);
    const SymMatrix a = fixed_point(op, in.sys.Q());
    const SymMatrix start = in.sys.Q() * 10.0 + gen.psd(in.sys.n(), gen.log_uniform(1.0, 100.0));
    const SymMatrix b = fixed_point(op, start);
    if ((a.mat() - b.mat()).norm() > 1e-8 * std::max(1.0, a.frobenius())) ++bad;
  }
  return bad;
}

}  // namespace crsn::testing
