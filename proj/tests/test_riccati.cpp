#include <cmath>

#include "doctest.h"
#include "generators.hpp"
#include "oracles.hpp"
#include "properties.hpp"

#include "crsn/rates.hpp"
#include "crsn/riccati.hpp"

using namespace crsn;
using crsn::testing::Gen;
using crsn::testing::scalar_fixed_point;

namespace {

LtiSystem scalar(double a = 0.8) {
  return LtiSystem(Matrix::Constant(1, 1, a), Matrix::Identity(1, 1), SymMatrix::identity(1), SymMatrix::identity(1));
}

LtiSystem design_plant() {
  Matrix a(2, 2), c(2, 2);
  a << 0.8, 1.0, 0.0, 0.95;
  c << 0.5, 0.3, 0.0, 1.4;
  return LtiSystem(a, c, SymMatrix::identity(2), SymMatrix::identity(2));
}

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::kInternal;
}

}  // namespace

TEST_CASE("h examples") {
  const LtiSystem sys = scalar();
  CHECK(h(sys, SymMatrix::zero(1))(0, 0) == 1.0);
  CHECK(h(sys, SymMatrix::scalar(1.0 / 0.36))(0, 0) == doctest::Approx(1.0 / 0.36).epsilon(1e-14));
  const LtiSystem id(Matrix::Identity(2, 2), Matrix::Identity(1, 2), SymMatrix::zero(2), SymMatrix::identity(1));
  Gen gen(1);
  const SymMatrix x = gen.psd(2);
  CHECK((h(id, x).mat() - x.mat()).norm() < 1e-15);
}

TEST_CASE("g examples") {
  const LtiSystem sys = scalar();
  const RiccatiOp op(sys, 1.0, SymMatrix::scalar(1.0));
  // 0.64 x + 1 - 0.64 x^2 / (x + 1) at x = 25/9
  CHECK(g(op, SymMatrix::scalar(2.77778))(0, 0) == doctest::Approx(1.47060).epsilon(1e-5));

  const LtiSystem blind(Matrix::Constant(1, 1, 0.8), Matrix::Zero(1, 1), SymMatrix::identity(1),
                        SymMatrix::identity(1));
  const RiccatiOp bop(blind, 0.7, SymMatrix::scalar(2.0));
  CHECK(g(bop, SymMatrix::scalar(3.0))(0, 0) == doctest::Approx(h(blind, SymMatrix::scalar(3.0))(0, 0)));

  // information form with a zero direction equals h
  const RiccatiOp inf = RiccatiOp::from_information(sys, 1.0, SymMatrix::zero(1));
  CHECK(g(inf, SymMatrix::scalar(2.0))(0, 0) == doctest::Approx(0.64 * 2.0 + 1.0));

  Gen gen(2);
  for (int t = 0; t < 100; ++t) {
    const LtiSystem p = gen.plant(gen.integer(1, 4), gen.integer(1, 3));
    const SymMatrix x = gen.psd(p.n());
    const SymMatrix w = gen.pd(p.m());
    const double theta = gen.uniform(0.1, 1.0);
    const Matrix ax = p.A() * x.mat();
    const Matrix direct = ax * p.A().transpose() + p.Q().mat() -
                          theta * ax * p.C().transpose() *
                              (p.C() * x.mat() * p.C().transpose() + w.mat()).inverse() * p.C() * ax.transpose();
    const SymMatrix got = g(RiccatiOp(p, theta, w), x);
    CHECK((got.mat() - direct).norm() < 1e-10 * std::max(1.0, direct.norm()));
    CHECK(psd_leq(p.Q(), got, 1e-10));
  }
}

TEST_CASE("X0 of the two-output plant") {
  const SymMatrix x0 = x_zero(design_plant(), 0.8);
  CHECK(std::abs(x0(0, 0) - 2.4353) < 1e-3);
  CHECK(std::abs(x0(0, 1) - 0.3976) < 1e-3);
  CHECK(std::abs(x0(1, 1) - 1.3756) < 1e-3);
}

TEST_CASE("fixed point is independent of the start") {
  const LtiSystem sys = design_plant();
  const RiccatiOp op(sys, 1.0, SymMatrix(sys.R().mat() / 0.8));
  const SymMatrix a = fixed_point(op, sys.Q());
  const SymMatrix b = fixed_point(op, steady_state(sys).Sigma * 10.0);
  CHECK((a.mat() - b.mat()).norm() < 1e-8);
  CHECK((g(op, a).mat() - a.mat()).norm() < 1e-9);
}

TEST_CASE("scalar fixed points match bisection") {
  const LtiSystem sys = scalar();
  for (double w : {0.1, 1.0, 1.25, 2.0, 10.0}) {
    for (double theta : {0.3, 0.8, 1.0}) {
      const double x = fixed_point(RiccatiOp(sys, theta, SymMatrix::scalar(w)), sys)(0, 0);
      CHECK(x == doctest::Approx(scalar_fixed_point(0.8, 1.0, w, theta)).epsilon(1e-9));
    }
  }
  // unstable scalar plant, theta above 1 - 1/a^2 = 0.5556
  const LtiSystem u = scalar(1.5);
  const double x = fixed_point(RiccatiOp(u, 0.7, SymMatrix::scalar(1.0)), u)(0, 0);
  CHECK(x == doctest::Approx(scalar_fixed_point(1.5, 1.0, 1.0, 0.7)).epsilon(1e-9));
  CHECK(code_of([&] { fixed_point(RiccatiOp(u, 0.3, SymMatrix::scalar(1.0)), u); }) ==
        ErrorCode::kRiccatiDivergence);
}

TEST_CASE("open-loop bounds on the scalar plant") {
  const LtiSystem sys = scalar();
  const SymMatrix y = SymMatrix::scalar(1.0);
  const BoundSet b = bound_set_open(sys, 0.8, y);
  CHECK(b.x_upper(0, 0) == doctest::Approx(scalar_fixed_point(0.8, 1.0, 2.0, 0.8)).epsilon(1e-9));
  CHECK(b.x_upper(0, 0) == doctest::Approx(1.68349).epsilon(1e-5));
  CHECK(b.x_lower(0, 0) == doctest::Approx(1.49827).epsilon(1e-5));
  CHECK(b.x_zero(0, 0) == doctest::Approx(1.42636).epsilon(1e-5));
  REQUIRE(b.x_p.has_value());
  CHECK((*b.x_p)(0, 0) == doctest::Approx(1.14679).epsilon(1e-5));
  CHECK(b.gamma == doctest::Approx(0.43400).epsilon(1e-4));
  // lower bound uses 1 / R1 = gamma + (lambda - gamma) / 2
  const double r1 = 1.0 / (b.gamma + (0.8 - b.gamma) / 2.0);
  CHECK(b.x_lower(0, 0) == doctest::Approx(scalar_fixed_point(0.8, 1.0, r1, 1.0)).epsilon(1e-9));
}

TEST_CASE("open-loop blend degenerates at gamma = lambda and gamma = 0") {
  Gen gen(3);
  for (int t = 0; t < 20; ++t) {
    const LtiSystem sys = gen.plant(gen.integer(1, 3), gen.integer(1, 3));
    const double lambda = gen.uniform(0.3, 1.0);
    const SymMatrix y = gen.pd(sys.m());
    const BoundSet full = bound_set_open(sys, lambda, y, lambda);
    CHECK((full.x_lower.mat() - full.x_zero.mat()).norm() < 1e-8 * std::max(1.0, full.x_zero.frobenius()));

    const BoundSet none = bound_set_open(sys, lambda, y, 0.0);
    REQUIRE(none.r_one.has_value());
    const Matrix expected = (sys.R().mat() + y.inverse().mat()) / lambda;
    CHECK((none.r_one->mat() - expected).norm() < 1e-9 * expected.norm());
  }
}

TEST_CASE("closed-loop bound ordering on random instances") {
  Gen gen(4);
  for (int t = 0; t < 50; ++t) {
    const LtiSystem sys = gen.plant(gen.integer(1, 3), gen.integer(1, 3));
    const double lambda = gen.uniform(0.2, 1.0);
    const SymMatrix z = gen.pd(sys.m(), gen.log_uniform(0.01, 10.0));
    const BoundSet b = bound_set_closed(sys, lambda, z);
    CHECK(psd_leq(b.x_zero, b.x_lower, testing::leq_slack(b.x_zero, b.x_lower)));
    CHECK(psd_leq(b.x_lower, b.x_upper, testing::leq_slack(b.x_lower, b.x_upper)));
    CHECK(b.gamma == doctest::Approx(closed_loop_rate_upper(b.x_upper, z, sys, lambda)));
  }
}

TEST_CASE("closed-loop upper bound tends to the Kalman covariance for large Z and lambda = 1") {
  const LtiSystem sys = design_plant();
  const SymMatrix kalman = fixed_point(RiccatiOp(sys, 1.0, sys.R()), sys);
  const BoundSet b = bound_set_closed(sys, 1.0, SymMatrix::identity(2) * 1e8);
  CHECK((b.x_upper.mat() - kalman.mat()).norm() < 1e-6 * kalman.frobenius());
}

TEST_CASE("X_p") {
  CHECK(x_p(scalar(), 0.8)(0, 0) == doctest::Approx(1.0 / (1.0 - 0.2 * 0.64)).epsilon(1e-10));
  CHECK(x_p(scalar(), 0.2)(0, 0) == doctest::Approx(1.0 / (1.0 - 0.8 * 0.64)).epsilon(1e-10));
  CHECK(x_p(scalar(), 0.2)(0, 0) == doctest::Approx(2.04918).epsilon(1e-5));
  const LtiSystem sys = design_plant();
  CHECK((x_p(sys, 1.0).mat() - sys.Q().mat()).norm() < 1e-14);
  CHECK(code_of([] { x_p(scalar(2.0), 0.5); }) == ErrorCode::kInfeasibleLambda);
}

TEST_CASE("quality bound checks") {
  const LtiSystem sys = design_plant();
  const SymMatrix x0 = x_zero(sys, 0.8);
  CHECK((check_quality_bound(sys, 0.8, x0 + SymMatrix::identity(2)).mat() - x0.mat()).norm() < 1e-12);
  CHECK(code_of([&] { check_quality_bound(sys, 0.8, x0 - SymMatrix::identity(2) * 0.1); }) ==
        ErrorCode::kInfeasibleQualityBound);
  CHECK(code_of([] { check_quality_bound(scalar(2.0), 0.5, SymMatrix::scalar(100.0)); }) ==
        ErrorCode::kInfeasibleLambda);
}

TEST_CASE("finite-horizon bound iterates stay ordered and converge") {
  const LtiSystem sys = scalar();
  const SymMatrix y = SymMatrix::scalar(1.0);
  const BoundSet b = bound_set_open(sys, 0.8, y);
  const RiccatiOp upper(sys, 0.8, SymMatrix::scalar(2.0));
  const RiccatiOp lower(sys, 1.0, *b.r_one);
  SymMatrix u = steady_state(sys).Sigma, l = u;
  for (int k = 0; k < 200; ++k) {
    const SymMatrix un = g(upper, u), ln = g(lower, l);
    CHECK(ln(0, 0) <= un(0, 0));
    CHECK(un(0, 0) <= u(0, 0) + 1e-12);  // decreasing from Sigma
    u = un;
    l = ln;
  }
  CHECK(u(0, 0) == doctest::Approx(b.x_upper(0, 0)).epsilon(1e-10));
  CHECK(l(0, 0) == doctest::Approx(b.x_lower(0, 0)).epsilon(1e-10));
}

TEST_CASE("operator properties on random instances") {
  CHECK(testing::monotone_violations(300, 11) == 0);
  CHECK(testing::concavity_violations(300, 12) == 0);
  CHECK(testing::w_monotone_violations(300, 13) == 0);
  CHECK(testing::start_dependence_violations(100, 14) == 0);
}
