#include "crsn/sysmodel.hpp"

#include <cmath>
#include <string>

namespace crsn {

namespace {

SmallMatrix noise_factor(const SymMatrix& cov) {
  Eigen::LLT<Matrix> llt(cov.mat());
  if (llt.info() == Eigen::Success && min_eigenvalue(cov) > 0.0) {
    return SmallMatrix(Matrix(llt.matrixL()));
  }
  // Singular covariance: the symmetric square root is still a valid factor.
  return SmallMatrix(psd_sqrt(cov).mat());
}

SmallVector draw_gaussian(const SmallMatrix& factor, RandomSource& rng) {
  SmallVector z(factor.cols());
  for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = rng.normal();
  return factor * z;
}

}  // namespace

LtiSystem::LtiSystem(Matrix a, Matrix c, SymMatrix q, SymMatrix r, SymMatrix pi0)
    : a_(std::move(a)), c_(std::move(c)), q_(std::move(q)), r_(std::move(r)), pi0_(std::move(pi0)) {
  require_finite(a_, "A");
  require_finite(c_, "C");
  const int nn = static_cast<int>(a_.rows());
  if (a_.cols() != nn || nn == 0) throw Error(ErrorCode::kDimensionMismatch, "A must be square and non-empty");
  if (c_.cols() != nn || c_.rows() == 0) throw Error(ErrorCode::kDimensionMismatch, "C must have n columns");
  const int mm = static_cast<int>(c_.rows());
  if (nn > kMaxFilterDim || mm > kMaxFilterDim) {
    throw Error(ErrorCode::kInvalidInput, "state and output dimensions are limited to " +
                                              std::to_string(kMaxFilterDim));
  }
  if (q_.dim() != nn) throw Error(ErrorCode::kDimensionMismatch, "Q must be n x n");
  if (r_.dim() != mm) throw Error(ErrorCode::kDimensionMismatch, "R must be m x m");
  if (pi0_.dim() == 0) pi0_ = q_;
  if (pi0_.dim() != nn) throw Error(ErrorCode::kDimensionMismatch, "Pi0 must be n x n");
  if (!is_psd(q_)) throw Error(ErrorCode::kInvalidInput, "Q must be positive semidefinite");
  if (min_eigenvalue(r_) <= 0.0) throw Error(ErrorCode::kInvalidInput, "R must be positive definite");
  if (!is_psd(pi0_)) throw Error(ErrorCode::kInvalidInput, "Pi0 must be positive semidefinite");
  rho_ = crsn::spectral_radius(a_);

  kernel_.A = a_;
  kernel_.C = c_;
  kernel_.Q = q_.mat();
  kernel_.R = r_.mat();
  kernel_.q_factor = noise_factor(q_);
  kernel_.r_factor = noise_factor(r_);
  kernel_.x0_factor = noise_factor(stable() ? steady_state(*this).Sigma : pi0_);
}

SteadyState steady_state(const LtiSystem& sys) {
  if (!sys.stable()) {
    throw Error(ErrorCode::kUnstablePlant,
                "steady state requires rho(A) < 1, got " + std::to_string(sys.spectral_radius()));
  }
  const Matrix& a = sys.A();
  Matrix sigma = sys.Q().mat();
  for (int it = 0; it < 1'000'000; ++it) {
    Matrix next = symmetrize(a * sigma * a.transpose() + sys.Q().mat());
    const double change = (next - sigma).norm();
    sigma = std::move(next);
    if (change < 1e-12 * std::max(1.0, sigma.norm())) break;
  }
  SymMatrix s(sigma);
  SymMatrix pi(sys.C() * s.mat() * sys.C().transpose() + sys.R().mat());
  return {std::move(s), std::move(pi)};
}

ChannelModel::ChannelModel(double lam, std::uint64_t seed) : lambda(lam), rng_seed(seed) {
  if (!(lam > 0.0 && lam <= 1.0)) {
    throw Error(ErrorCode::kInvalidInput, "channel availability lambda must lie in (0, 1]");
  }
}

int draw_channel(const ChannelModel& ch, RandomSource& rng) {
  if (ch.lambda >= 1.0) {
    rng.uniform();  // keep stream alignment independent of lambda
    return 1;
  }
  return rng.uniform() < ch.lambda ? 1 : 0;
}

SimState initial_state(const LtiSystem& sys, RandomSource& rng) {
  return SimState{draw_gaussian(sys.kernel().x0_factor, rng), 0};
}

PlantStep step_plant(const SimState& state, const LtiSystem& sys, RandomSource& rng) {
  const PlantKernel& k = sys.kernel();
  PlantStep out;
  out.y = k.C * state.x + draw_gaussian(k.r_factor, rng);
  out.next.x = k.A * state.x + draw_gaussian(k.q_factor, rng);
  out.next.step = state.step + 1;
  return out;
}

bool feasibility_check(const LtiSystem& sys, double lambda) {
  const double rho = sys.spectral_radius();
  if (rho == 0.0) return true;
  return lambda > 1.0 - 1.0 / (rho * rho);
}

Matrix matrix_from_json(const nlohmann::json& j, const char* name) {
  if (j.is_number()) return Matrix::Constant(1, 1, j.get<double>());
  if (!j.is_array() || j.empty()) {
    throw Error(ErrorCode::kConfig, std::string(name) + " must be a number or a non-empty array");
  }
  if (j.front().is_number()) {  // flat list: one row
    Matrix m(1, static_cast<Eigen::Index>(j.size()));
    for (std::size_t c = 0; c < j.size(); ++c) m(0, static_cast<Eigen::Index>(c)) = j[c].get<double>();
    return m;
  }
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = static_cast<Eigen::Index>(j.front().size());
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto& row = j[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
      throw Error(ErrorCode::kConfig, std::string(name) + " has ragged rows");
    }
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = row[static_cast<std::size_t>(c)].get<double>();
  }
  return m;
}

nlohmann::json matrix_to_json(const Matrix& m) {
  nlohmann::json out = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    out.push_back(std::move(row));
  }
  return out;
}

LtiSystem plant_from_json(const nlohmann::json& j) {
  for (const char* key : {"A", "C", "Q", "R"}) {
    if (!j.contains(key)) throw Error(ErrorCode::kConfig, std::string("plant is missing \"") + key + "\"");
  }
  try {
    SymMatrix pi0 = j.contains("Pi0") ? SymMatrix(matrix_from_json(j.at("Pi0"), "Pi0")) : SymMatrix();
    return LtiSystem(matrix_from_json(j.at("A"), "A"), matrix_from_json(j.at("C"), "C"),
                     SymMatrix(matrix_from_json(j.at("Q"), "Q")), SymMatrix(matrix_from_json(j.at("R"), "R")),
                     std::move(pi0));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kConfig, std::string("malformed plant: ") + e.what());
  }
}

nlohmann::json plant_to_json(const LtiSystem& sys) {
  return {{"A", matrix_to_json(sys.A())},
          {"C", matrix_to_json(sys.C())},
          {"Q", matrix_to_json(sys.Q().mat())},
          {"R", matrix_to_json(sys.R().mat())},
          {"Pi0", matrix_to_json(sys.Pi0().mat())}};
}

}  // namespace crsn
