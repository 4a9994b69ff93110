#pragma once

#include <functional>
#include <string>
#include <vector>

#include "crsn/matcore.hpp"
#include "crsn/rates.hpp"
#include "crsn/sysmodel.hpp"

namespace crsn {

/// Current values of all decision variables, indexed by variable id.
class VarValues {
 public:
  explicit VarValues(std::vector<Matrix> values) : values_(std::move(values)) {}
  const Matrix& operator[](int id) const { return values_[static_cast<std::size_t>(id)]; }
  double scalar(int id) const { return values_[static_cast<std::size_t>(id)](0, 0); }
  std::size_t size() const { return values_.size(); }

 private:
  std::vector<Matrix> values_;
};

/// Affine maps from the variables; linearity is assumed, and the solver
/// extracts coefficients by evaluating the map at the origin and at unit points.
using BlockMap = std::function<Matrix(const VarValues&)>;
using ScalarMap = std::function<double(const VarValues&)>;

/// min objective(v) s.t. each block(v) >= 0 (PSD), each equality(v) = 0,
/// lo <= interval(v) <= hi. Variables are symmetric matrices (scalars are 1 x 1).
class SdpProblem {
 public:
  int add_variable(int dim, std::string name);
  int add_scalar(std::string name) { return add_variable(1, std::move(name)); }
  void add_psd_block(int dim, BlockMap map, std::string name);
  void add_equality(ScalarMap map, std::string name);
  void add_interval(ScalarMap map, double lo, double hi, std::string name);
  void set_objective(ScalarMap map) { objective_ = std::move(map); }

  struct Variable {
    std::string name;
    int dim;
    int offset;  // first coordinate in the stacked vech vector
  };
  struct Block {
    std::string name;
    int dim;
    BlockMap map;
  };
  struct Interval {
    std::string name;
    ScalarMap map;
    double lo, hi;
  };

  const std::vector<Variable>& variables() const { return vars_; }
  const std::vector<Block>& blocks() const { return blocks_; }
  const std::vector<Interval>& equalities() const { return eqs_; }
  const std::vector<Interval>& intervals() const { return intervals_; }
  const ScalarMap& objective() const { return objective_; }
  int num_coords() const { return num_coords_; }

  /// Variable values for a stacked coordinate vector.
  VarValues unpack(const Vector& coords) const;
  /// Stacked coordinates for per-variable values.
  Vector pack(const std::vector<Matrix>& values) const;

 private:
  std::vector<Variable> vars_;
  std::vector<Block> blocks_;
  std::vector<Interval> eqs_;
  std::vector<Interval> intervals_;
  ScalarMap objective_;
  int num_coords_ = 0;
};

/// kNoInterior: feasible up to 1e-7 of the data scale but without a strictly
/// feasible point, reported only when widening is disabled.
enum class SdpStatus { kOptimal, kInfeasible, kNoInterior, kIterationLimit };
const char* to_string(SdpStatus s);

enum class SdpMethod {
  kInteriorPoint,  // log-barrier path following with Newton centering
  kSplitting,      // ADMM with PSD projections
};

struct SolverOptions {
  SdpMethod method = SdpMethod::kInteriorPoint;
  /// Splitting: primal/dual residual tolerance. Interior point: relative
  /// duality-gap target.
  double tol = 1e-7;
  /// Splitting: ADMM iterations. Interior point: Newton steps.
  int max_iter = 200000;
  // Splitting only.
  double alpha = 1.5;   // over-relaxation
  double sigma = 1e-6;  // proximal weight on x
  double rho = 0.1;
  bool adaptive_rho = true;
  int scaling_iters = 15;
  double infeasibility_tol = 1e-8;
  // Interior point only: solve problems without a strictly feasible point on
  // slightly widened cones instead of reporting kNoInterior.
  bool allow_widening = true;
};

/// Iterates from a previous solve of a problem with the same shape.
struct WarmStart {
  Vector x, s, y;
};

struct SdpSolution {
  std::vector<SymMatrix> values;
  double objective_value = 0.0;
  /// Largest constraint violation at the returned point: worst negative block
  /// eigenvalue, equality residual or interval excess.
  double primal_infeasibility = 0.0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  int iterations = 0;
  SdpStatus status = SdpStatus::kIterationLimit;
  WarmStart iterate;  // scaled internal iterate, usable as a warm start

  const SymMatrix& value(int id) const { return values[static_cast<std::size_t>(id)]; }
  double scalar(int id) const { return values[static_cast<std::size_t>(id)](0, 0); }
};

/// Solves the problem with the selected method.
///
/// Splitting: ADMM on min c^T x s.t. A x + s = b, s in (zero cone x intervals x
/// PSD cones), with Ruiz equilibration, over-relaxation, adaptive penalty and a
/// cached Cholesky factor of the linear step; infeasibility from the dual
/// increment certificate.
///
/// Interior point: equalities eliminated through a null-space basis, a phase-I
/// problem finds a strictly feasible point (or proves infeasibility), then a
/// log-barrier path is followed until the duality-gap bound meets `tol`.
/// Problems whose feasible set has no interior are solved with every cone
/// widened by the phase-I residual, which shows up in primal_infeasibility.
SdpSolution solve(const SdpProblem& p, const SolverOptions& opts = {}, const WarmStart* warm = nullptr);

// --- Builders ----------------------------------------------------------------

/// Constant data of the design block Psi(S, T).
struct PsiData {
  Matrix A, C, q_inv, r_inv;
  double lambda = 1.0;
  bool q_perturbed = false;  // Q was singular and Q + 1e-9 I was used instead
};

/// Throws singular-Q when Q is singular and `allow_q_perturbation` is false.
PsiData psi_data(const LtiSystem& sys, double lambda, bool allow_q_perturbation = true);

/// The (4n + m) x (4n + m) block
///   [ S        sqrt(l) S A   sqrt(1-l) S A   S      0        ]
///   [ .        S + C'R^-1C   0               0      C'R^-1   ]
///   [ .        .             S               0      0        ]
///   [ .        .             .               Q^-1   0        ]
///   [ .        .             .               .      T + R^-1 ]
/// whose positivity is equivalent to g_{l, R + T^{-1}}(S^{-1}) <= S^{-1}.
Matrix psi(const PsiData& d, const Matrix& s, const Matrix& t);
BlockMap build_psi(int s_var, int t_var, const PsiData& d);

/// [[U, I], [I, V]] as an affine block of one or two variables (or a constant).
Matrix coupling_block(const Matrix& u, const Matrix& v);

struct OpenDesign {
  SymMatrix Y_star;
  SymMatrix S_star;
  SymMatrix x_upper;       // fixed point of g_{lambda, R + Y*^{-1}}
  RateReport rate;         // gamma at Y*, sandwich, gap bound
  double objective = 0.0;  // tr(Pi Y*)
  double quality_margin = 0.0;  // max eig(x_upper - M)
  double psi_min_eig = 0.0;     // min eig of Psi(S*, Y*)
  bool q_perturbed = false;
  SdpSolution solution;
};

/// min tr(Pi Y) s.t. Psi(S, Y) >= 0, [S I; I M] >= 0, Y >= 0, followed by a
/// fixed-point check that the realized upper bound respects M. Throws
/// solver-infeasible, or solver-failure when the iteration cap is hit.
OpenDesign design_open(const LtiSystem& sys, double lambda, const SymMatrix& m, const SolverOptions& opts = {});

struct ZStar {
  double value = 0.0;  // z*
  SymMatrix Z, S;
  SdpSolution solution;
};

/// z* = min tr((C M C^T + R) Z) / tr(C X0 C^T + R) s.t. [S I; I M] >= 0,
/// Psi(S, Z) >= 0, Z >= 0.
ZStar solve_zstar(const LtiSystem& sys, double lambda, const SymMatrix& m, const SymMatrix& x0,
                  const SolverOptions& opts = {});

}  // namespace crsn
