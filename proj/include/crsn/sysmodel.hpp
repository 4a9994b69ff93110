#pragma once

#include <cstdint>
#include <utility>

#include "json.hpp"

#include "crsn/matcore.hpp"
#include "crsn/random.hpp"

namespace crsn {

/// Stack-allocated copies of the plant matrices plus noise factors, for the
/// simulation hot path.
struct PlantKernel {
  SmallMatrix A, C, Q, R;
  SmallMatrix q_factor;   // F F^T = Q
  SmallMatrix r_factor;   // F F^T = R
  SmallMatrix x0_factor;  // F F^T = Sigma (stable) or Pi0
};

/// x_{k+1} = A x_k + w_k,  y_k = C x_k + v_k,  w ~ N(0, Q), v ~ N(0, R),
/// x_0 ~ N(0, Pi0).
class LtiSystem {
 public:
  /// Validates shapes, Q >= 0, R > 0, Pi0 >= 0. `pi0` defaults to Q when empty.
  LtiSystem(Matrix a, Matrix c, SymMatrix q, SymMatrix r, SymMatrix pi0 = SymMatrix());

  int n() const { return static_cast<int>(a_.rows()); }
  int m() const { return static_cast<int>(c_.rows()); }
  const Matrix& A() const { return a_; }
  const Matrix& C() const { return c_; }
  const SymMatrix& Q() const { return q_; }
  const SymMatrix& R() const { return r_; }
  const SymMatrix& Pi0() const { return pi0_; }
  double spectral_radius() const { return rho_; }
  bool stable() const { return rho_ < 1.0; }
  const PlantKernel& kernel() const { return kernel_; }

 private:
  Matrix a_, c_;
  SymMatrix q_, r_, pi0_;
  double rho_ = 0.0;
  PlantKernel kernel_;
};

struct SteadyState {
  SymMatrix Sigma;  // Sigma = A Sigma A^T + Q
  SymMatrix Pi;     // Pi = C Sigma C^T + R
};

/// Stationary state/output covariance of a stable plant by Lyapunov fixed-point
/// iteration. Throws unstable-plant when rho(A) >= 1.
SteadyState steady_state(const LtiSystem& sys);

/// Bernoulli channel availability: eta_k = 1 (channel free) with probability lambda.
struct ChannelModel {
  double lambda = 1.0;
  std::uint64_t rng_seed = 0;

  ChannelModel() = default;
  ChannelModel(double lam, std::uint64_t seed);
};

int draw_channel(const ChannelModel& ch, RandomSource& rng);

struct SimState {
  SmallVector x;
  std::uint64_t step = 0;
};

struct PlantStep {
  SimState next;
  SmallVector y;  // measurement of the state before the transition
};

/// Draws x_0 from N(0, Sigma) for stable plants and N(0, Pi0) otherwise.
SimState initial_state(const LtiSystem& sys, RandomSource& rng);
PlantStep step_plant(const SimState& state, const LtiSystem& sys, RandomSource& rng);

/// Mean error covariance stays bounded when lambda > 1 - 1/rho(A)^2.
bool feasibility_check(const LtiSystem& sys, double lambda);

/// Reads {"A", "C", "Q", "R", "Pi0"} (numbers or nested arrays).
LtiSystem plant_from_json(const nlohmann::json& j);
nlohmann::json plant_to_json(const LtiSystem& sys);
Matrix matrix_from_json(const nlohmann::json& j, const char* name);
nlohmann::json matrix_to_json(const Matrix& m);

}  // namespace crsn
