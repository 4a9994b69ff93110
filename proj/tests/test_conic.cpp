#include <cmath>

#include "doctest.h"
#include "generators.hpp"
#include "oracles.hpp"

#include "crsn/conic.hpp"
#include "crsn/riccati.hpp"

using namespace crsn;
using crsn::testing::Gen;
using crsn::testing::scalar_fixed_point;

namespace {

LtiSystem scalar(double q = 1.0, double r = 1.0) {
  return LtiSystem(Matrix::Constant(1, 1, 0.8), Matrix::Identity(1, 1), SymMatrix::scalar(q), SymMatrix::scalar(r));
}

LtiSystem design_plant() {
  Matrix a(2, 2), c(2, 2);
  a << 0.8, 1.0, 0.0, 0.95;
  c << 0.5, 0.3, 0.0, 1.4;
  return LtiSystem(a, c, SymMatrix::identity(2), SymMatrix::identity(2));
}

Matrix mat1(double v) { return Matrix::Constant(1, 1, v); }

SolverOptions splitting() {
  SolverOptions o;
  o.method = SdpMethod::kSplitting;
  o.tol = 1e-9;
  return o;
}

}  // namespace

TEST_CASE("scalar SDPs") {
  for (const SolverOptions& opts : {SolverOptions{}, splitting()}) {
    SdpProblem p;
    const int x = p.add_scalar("x");
    p.add_psd_block(1, [x](const VarValues& v) { return Matrix(v[x] - mat1(1.0)); }, "x>=1");
    p.set_objective([x](const VarValues& v) { return v.scalar(x); });
    const SdpSolution s = solve(p, opts);
    CHECK(s.status == SdpStatus::kOptimal);
    CHECK(s.scalar(x) == doctest::Approx(1.0).epsilon(1e-5));

    // min t s.t. [[t, 1], [1, 2]] >= 0 gives t = 1/2
    SdpProblem q;
    const int t = q.add_scalar("t");
    q.add_psd_block(2,
                    [t](const VarValues& v) {
                      Matrix m(2, 2);
                      m << v.scalar(t), 1.0, 1.0, 2.0;
                      return m;
                    },
                    "schur");
    q.set_objective([t](const VarValues& v) { return v.scalar(t); });
    const SdpSolution sq = solve(q, opts);
    CHECK(sq.status == SdpStatus::kOptimal);
    CHECK(sq.objective_value == doctest::Approx(0.5).epsilon(1e-5));
  }
}

TEST_CASE("interval and equality constraints") {
  SdpProblem p;
  const int a = p.add_scalar("a"), b = p.add_scalar("b");
  p.add_psd_block(1, [a](const VarValues& v) { return Matrix(v[a]); }, "a>=0");
  p.add_psd_block(1, [b](const VarValues& v) { return Matrix(v[b]); }, "b>=0");
  p.add_equality([a, b](const VarValues& v) { return v.scalar(a) + v.scalar(b) - 1.0; }, "sum");
  p.add_interval([a](const VarValues& v) { return v.scalar(a); }, 0.25, 0.75, "a range");
  p.set_objective([a, b](const VarValues& v) { return 2.0 * v.scalar(a) + v.scalar(b); });
  const SdpSolution s = solve(p);
  CHECK(s.status == SdpStatus::kOptimal);
  CHECK(s.scalar(a) == doctest::Approx(0.25).epsilon(1e-5));
  CHECK(s.objective_value == doctest::Approx(1.25).epsilon(1e-5));
}

TEST_CASE("constructed matrix SDP: min tr(C X) s.t. X >= B") {
  Gen gen(5);
  for (int t = 0; t < 5; ++t) {
    const SymMatrix c = gen.pd(3), b = gen.symmetric(3);
    for (const SolverOptions& opts : {SolverOptions{}, splitting()}) {
      SdpProblem p;
      const int x = p.add_variable(3, "X");
      p.add_psd_block(3, [x, b](const VarValues& v) { return Matrix(v[x] - b.mat()); }, "X>=B");
      p.set_objective([x, c](const VarValues& v) { return (c.mat() * v[x]).trace(); });
      const SdpSolution s = solve(p, opts);
      CHECK(s.status == SdpStatus::kOptimal);
      const double expected = (c.mat() * b.mat()).trace();
      CHECK(std::abs(s.objective_value - expected) < 1e-5 * std::max(1.0, std::abs(expected)));
      CHECK((s.value(x).mat() - b.mat()).norm() < 1e-3);
    }
  }
}

TEST_CASE("infeasible problems are reported") {
  SdpProblem p;
  const int x = p.add_scalar("x");
  p.add_psd_block(1, [x](const VarValues& v) { return Matrix(v[x] - mat1(1.0)); }, "x>=1");
  p.add_psd_block(1, [x](const VarValues& v) { return Matrix(-v[x]); }, "x<=0");
  p.set_objective([x](const VarValues& v) { return v.scalar(x); });
  CHECK(solve(p).status == SdpStatus::kInfeasible);
  CHECK(solve(p, splitting()).status == SdpStatus::kInfeasible);
}

TEST_CASE("pack and unpack") {
  SdpProblem p;
  const int a = p.add_variable(2, "A");
  const int s = p.add_scalar("s");
  CHECK(p.num_coords() == 4);
  Matrix m(2, 2);
  m << 1.0, 2.0, 2.0, 3.0;
  const Vector coords = p.pack({m, mat1(7.0)});
  const VarValues v = p.unpack(coords);
  CHECK(v[a] == m);
  CHECK(v.scalar(s) == 7.0);
}

TEST_CASE("Psi block shape and structure") {
  const LtiSystem sys = design_plant();
  const PsiData d = psi_data(sys, 0.8);
  const Matrix blk = psi(d, Matrix::Identity(2, 2), Matrix::Identity(2, 2));
  CHECK(blk.rows() == 4 * 2 + 2);
  CHECK(blk.cols() == 4 * 2 + 2);
  CHECK((blk - blk.transpose()).norm() == 0.0);
  // lambda = 1 removes the (1 - lambda) coupling
  const Matrix one = psi(psi_data(sys, 1.0), Matrix::Identity(2, 2), Matrix::Identity(2, 2));
  CHECK(one.block(0, 4, 2, 2).norm() == 0.0);

  const LtiSystem singular(Matrix::Identity(2, 2) * 0.5, Matrix::Identity(1, 2), SymMatrix::zero(2),
                           SymMatrix::identity(1));
  CHECK(psi_data(singular, 0.8).q_perturbed);
  CHECK_THROWS_AS(psi_data(singular, 0.8, false), Error);
}

TEST_CASE("Psi >= 0 exactly when g(S^-1) <= S^-1") {
  Gen gen(6);
  int checked = 0;
  for (int t = 0; t < 300; ++t) {
    const int n = gen.integer(1, 3), m = gen.integer(1, 2);
    const LtiSystem sys = gen.plant(n, m);
    const double lambda = gen.uniform(0.2, 1.0);
    const SymMatrix trig = gen.pd(m, gen.log_uniform(0.1, 10.0));
    const SymMatrix x = gen.pd(n, gen.log_uniform(0.5, 20.0));
    const RiccatiOp op(sys, lambda, sys.R() + trig.inverse());
    const double slack = min_eigenvalue(x - g(op, x));
    const double peig = min_eigenvalue(SymMatrix(psi(psi_data(sys, lambda), x.inverse().mat(), trig.mat())));
    if (std::abs(slack) < 1e-6 || std::abs(peig) < 1e-9) continue;
    ++checked;
    CHECK((slack > 0.0) == (peig > 0.0));
  }
  CHECK(checked > 250);

  // at the fixed point the block is singular, above it positive
  const LtiSystem sys = design_plant();
  const SymMatrix trig = SymMatrix::identity(2);
  const SymMatrix xbar = fixed_point(RiccatiOp(sys, 0.8, sys.R() + trig.inverse()), sys);
  const PsiData d = psi_data(sys, 0.8);
  CHECK(std::abs(min_eigenvalue(SymMatrix(psi(d, xbar.inverse().mat(), trig.mat())))) < 1e-8);
  CHECK(min_eigenvalue(SymMatrix(psi(d, (xbar * 2.0).inverse().mat(), trig.mat()))) > 0.0);
  CHECK(min_eigenvalue(SymMatrix(psi(d, (xbar * 0.5).inverse().mat(), trig.mat()))) < 0.0);
}

TEST_CASE("open-loop design on the scalar plant matches a bisection oracle") {
  const LtiSystem sys = scalar();
  const double m = 1.6;
  // smallest Y with the upper-bound fixed point at most M
  double lo = 1e-6, hi = 1e6;
  for (int i = 0; i < 200; ++i) {
    const double mid = std::sqrt(lo * hi);
    (scalar_fixed_point(0.8, 1.0, 1.0 + 1.0 / mid, 0.8) > m ? lo : hi) = mid;
  }
  const OpenDesign d = design_open(sys, 0.8, SymMatrix::scalar(m));
  CHECK(d.Y_star(0, 0) == doctest::Approx(hi).epsilon(1e-4));
  CHECK(d.Y_star(0, 0) == doctest::Approx(2.03533).epsilon(1e-4));
  CHECK(d.quality_margin <= 1e-5);
  CHECK(d.psi_min_eig >= -1e-6);
  CHECK(d.objective == doctest::Approx(steady_state(sys).Pi(0, 0) * d.Y_star(0, 0)).epsilon(1e-6));
}

TEST_CASE("loose quality bound needs almost no communication") {
  const OpenDesign d = design_open(design_plant(), 0.8, SymMatrix::identity(2) * 1e6);
  CHECK(d.rate.gamma < 1e-3);
  CHECK(d.quality_margin <= 1e-5);
}

TEST_CASE("open-loop design trade-off on the two-output plant") {
  const LtiSystem sys = design_plant();
  const SymMatrix x0 = x_zero(sys, 0.8);
  double prev = 1.0;
  for (double varpi : {1.0, 5.0, 10.0, 20.0}) {
    const SymMatrix m = x0 + SymMatrix::identity(2) * varpi;
    const OpenDesign d = design_open(sys, 0.8, m);
    CHECK(d.quality_margin <= 1e-5);
    CHECK(d.psi_min_eig >= -1e-6);
    CHECK(d.rate.gamma <= prev);
    CHECK(d.rate.gamma < 0.8);
    prev = d.rate.gamma;
  }
  CHECK_THROWS_AS(design_open(sys, 0.8, x0 - SymMatrix::identity(2) * 0.1), Error);
}

TEST_CASE("z* at the boundary and under scaling") {
  const LtiSystem sys = design_plant();
  const SymMatrix x0 = x_zero(sys, 0.8);
  // g_{1,R/lambda} <= g_{lambda,R} <= g_{lambda,R+Z^-1}, strictly along observed directions,
  // so no finite Z reaches M = X0 when lambda < 1
  try {
    solve_zstar(sys, 0.8, x0, x0);
    FAIL("expected an infeasibility report");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kSolverInfeasible);
  }
  const ZStar near = solve_zstar(sys, 0.8, x0 + SymMatrix::identity(2) * 1.0, x0);
  CHECK(std::isfinite(near.value));
  CHECK(near.value > 0.0);
  const ZStar loose = solve_zstar(sys, 0.8, x0 + SymMatrix::identity(2) * 5.0, x0);
  CHECK(loose.value < near.value);

  // scaling Q, R, M and X0 by alpha scales Z by 1/alpha and the normalized objective by 1/alpha
  const double alpha = 3.0;
  const LtiSystem s1 = scalar(), s3 = scalar(alpha, alpha);
  const SymMatrix m1 = SymMatrix::scalar(2.0), m3 = SymMatrix::scalar(2.0 * alpha);
  const ZStar z1 = solve_zstar(s1, 0.8, m1, x_zero(s1, 0.8));
  const ZStar z3 = solve_zstar(s3, 0.8, m3, x_zero(s3, 0.8));
  CHECK(z3.value * alpha == doctest::Approx(z1.value).epsilon(1e-4));
  CHECK(z3.Z(0, 0) * alpha == doctest::Approx(z1.Z(0, 0)).epsilon(1e-4));
}
