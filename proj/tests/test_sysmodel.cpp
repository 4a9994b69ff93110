#include <cmath>

#include "doctest.h"
#include "generators.hpp"

#include "crsn/sysmodel.hpp"

using namespace crsn;
using crsn::testing::Gen;

namespace {

LtiSystem scalar(double a, double c = 1.0, double q = 1.0, double r = 1.0) {
  return LtiSystem(Matrix::Constant(1, 1, a), Matrix::Constant(1, 1, c), SymMatrix::scalar(q), SymMatrix::scalar(r));
}

LtiSystem bounds_plant() {
  Matrix a(2, 2), c(1, 2);
  a << 0.8, 1.0, 0.0, 0.95;
  c << 1.0, 1.0;
  return LtiSystem(a, c, SymMatrix::identity(2), SymMatrix::identity(1));
}

double lyapunov_residual(const LtiSystem& sys, const SymMatrix& s) {
  return (s.mat() - sys.A() * s.mat() * sys.A().transpose() - sys.Q().mat()).norm();
}

}  // namespace

TEST_CASE("steady state of the scalar plant") {
  const SteadyState ss = steady_state(scalar(0.8));
  CHECK(ss.Sigma(0, 0) == doctest::Approx(1.0 / 0.36).epsilon(1e-10));
  CHECK(ss.Pi(0, 0) == doctest::Approx(1.0 / 0.36 + 1.0).epsilon(1e-10));
}

TEST_CASE("steady state with A = 0 is one-step whitening") {
  Matrix c(1, 2);
  c << 2.0, -1.0;
  Matrix q(2, 2);
  q << 2.0, 0.5, 0.5, 1.0;
  const LtiSystem sys(Matrix::Zero(2, 2), c, SymMatrix(q), SymMatrix::scalar(0.3));
  const SteadyState ss = steady_state(sys);
  CHECK((ss.Sigma.mat() - q).norm() < 1e-14);
  CHECK(ss.Pi(0, 0) == doctest::Approx((c * q * c.transpose())(0, 0) + 0.3));
}

TEST_CASE("steady state residual on the two-state plant and random plants") {
  const LtiSystem sys = bounds_plant();
  const SteadyState ss = steady_state(sys);
  CHECK(min_eigenvalue(ss.Sigma) > 0.0);
  CHECK(lyapunov_residual(sys, ss.Sigma) < 1e-9);

  Gen gen(21);
  for (int t = 0; t < 100; ++t) {
    const LtiSystem p = gen.plant(gen.integer(1, 4), gen.integer(1, 3));
    CHECK(lyapunov_residual(p, steady_state(p).Sigma) < 1e-9);
  }
  CHECK_THROWS_AS(steady_state(scalar(1.2)), Error);
}

TEST_CASE("plant construction rejects bad inputs") {
  CHECK_THROWS_AS(scalar(0.8, 1.0, 1.0, 0.0), Error);
  CHECK_THROWS_AS(scalar(0.8, 1.0, -1.0, 1.0), Error);
  CHECK_THROWS_AS(LtiSystem(Matrix::Identity(2, 2), Matrix::Identity(1, 3), SymMatrix::identity(2),
                            SymMatrix::identity(1)),
                  Error);
}

TEST_CASE("noiseless state transition") {
  Matrix c(1, 2);
  c << 1.0, 3.0;
  const LtiSystem sys(Matrix::Identity(2, 2), c, SymMatrix::zero(2), SymMatrix::scalar(1.0));
  RandomSource rng(3);
  SimState s;
  s.x = SmallVector(2);
  s.x << 1.0, 2.0;
  const PlantStep ps = step_plant(s, sys, rng);
  CHECK(ps.next.x(0) == 1.0);
  CHECK(ps.next.x(1) == 2.0);
  CHECK(ps.next.step == 1);
  CHECK(std::abs(ps.y(0) - 7.0) < 6.0);  // 7 plus one standard normal draw
}

TEST_CASE("output covariance matches Pi") {
  const LtiSystem sys = bounds_plant();
  const double pi = steady_state(sys).Pi(0, 0);
  double sum = 0.0, sum2 = 0.0;
  const int n = 100000;
  for (int p = 0; p < n; ++p) {
    RandomSource rng = RandomSource::for_path(4, static_cast<std::uint64_t>(p), Stream::kPlant);
    const PlantStep ps = step_plant(initial_state(sys, rng), sys, rng);
    sum += ps.y(0);
    sum2 += ps.y(0) * ps.y(0);
  }
  const double var = sum2 / n - (sum / n) * (sum / n);
  CHECK(std::abs(var / pi - 1.0) < 0.03);
}

TEST_CASE("state covariance stays at Sigma from a stationary start") {
  Matrix a(2, 2);
  a << 0.5, 0.3, -0.2, 0.6;
  const LtiSystem sys(a, Matrix::Identity(2, 2), SymMatrix::identity(2), SymMatrix::identity(2));
  const SymMatrix sigma = steady_state(sys).Sigma;
  Matrix acc = Matrix::Zero(2, 2);
  const int n = 100000;
  for (int p = 0; p < n; ++p) {
    RandomSource rng = RandomSource::for_path(9, static_cast<std::uint64_t>(p), Stream::kPlant);
    SimState s = initial_state(sys, rng);
    for (int k = 0; k < 5; ++k) s = step_plant(s, sys, rng).next;
    acc += s.x * s.x.transpose();
  }
  acc /= n;
  for (int i = 0; i < 2; ++i) CHECK(std::abs(acc(i, i) / sigma(i, i) - 1.0) < 0.05);
}

TEST_CASE("trajectories are reproducible and streams uncorrelated") {
  const LtiSystem sys = bounds_plant();
  auto run = [&](std::uint64_t path) {
    RandomSource rng = RandomSource::for_path(17, path, Stream::kPlant);
    SimState s = initial_state(sys, rng);
    std::vector<double> ys;
    for (int k = 0; k < 200; ++k) {
      const PlantStep ps = step_plant(s, sys, rng);
      ys.push_back(ps.y(0));
      s = ps.next;
    }
    return ys;
  };
  CHECK(run(3) == run(3));
  CHECK(run(3) != run(4));

  RandomSource a = RandomSource::for_path(17, 0, Stream::kPlant);
  RandomSource b = RandomSource::for_path(17, 1, Stream::kPlant);
  double sab = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) sab += a.normal() * b.normal();
  CHECK(std::abs(sab / n) < 4.0 / std::sqrt(n));
}

TEST_CASE("channel draws") {
  RandomSource rng(5);
  const ChannelModel always(1.0, 0);
  for (int i = 0; i < 1000; ++i) CHECK(draw_channel(always, rng) == 1);

  const ChannelModel ch(0.8, 0);
  long hits = 0;
  const int n = 1000000;
  for (int i = 0; i < n; ++i) hits += draw_channel(ch, rng);
  CHECK(std::abs(static_cast<double>(hits) / n - 0.8) < 0.002);

  const ChannelModel half(0.5, 0);
  RandomSource r1(8), r2(8);
  for (int i = 0; i < 1000; ++i) CHECK(draw_channel(half, r1) == draw_channel(half, r2));
  CHECK_THROWS_AS(ChannelModel(0.0, 0), Error);
  CHECK_THROWS_AS(ChannelModel(1.5, 0), Error);
}

TEST_CASE("feasibility of the channel availability") {
  for (double lam : {0.05, 0.5, 1.0}) CHECK(feasibility_check(scalar(0.8), lam));
  CHECK_FALSE(feasibility_check(scalar(2.0), 0.5));  // 0.5 < 1 - 1/4
  CHECK(feasibility_check(scalar(2.0), 0.8));
}

TEST_CASE("plant JSON round trip") {
  const LtiSystem sys = bounds_plant();
  const LtiSystem back = plant_from_json(plant_to_json(sys));
  CHECK(back.A() == sys.A());
  CHECK(back.C() == sys.C());
  CHECK(back.Q().mat() == sys.Q().mat());
  CHECK(back.R().mat() == sys.R().mat());
  const LtiSystem s = plant_from_json(nlohmann::json::parse(R"({"A": 0.8, "C": 1, "Q": 1, "R": 1})"));
  CHECK(s.A()(0, 0) == 0.8);
  CHECK_THROWS_AS(plant_from_json(nlohmann::json::parse(R"({"A": 0.8, "C": 1, "Q": 1})")), Error);
  CHECK_THROWS_AS(plant_from_json(nlohmann::json::parse(R"({"A": [[1, 2], [3]], "C": 1, "Q": 1, "R": 1})")), Error);
}
