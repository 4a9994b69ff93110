#pragma once

#include <vector>

#include "crsn/conic.hpp"
#include "crsn/matcore.hpp"
#include "crsn/sysmodel.hpp"

namespace crsn {

/// Rectangle over the bilinear coordinates. Coordinates are the lower-triangle
/// representatives of x = vec(X) and z = vec(C^T Z C) (vech order); entry (i, j)
/// and (j, i) share bounds. The Z box (y_lo, y_hi, vech of Z) is kept as a
/// constraint so that the region stays compact when C is singular.
struct Box {
  Vector x_lo, x_hi;
  Vector z_lo, z_hi;
  Vector y_lo, y_hi;

  int size() const { return static_cast<int>(x_lo.size()); }
  bool valid() const;
};

/// (lo, hi) for the x or z bounds of entry (i, j) in either order.
std::pair<double, double> x_bounds(const Box& b, int i, int j);
std::pair<double, double> z_bounds(const Box& b, int i, int j);

/// Rows k of the map z = G vech(Z) in vech coordinates, G = C^T (x) C^T.
Matrix bilinear_map(const Matrix& c);

/// Root box: diagonal X lows from X0, off-diagonal lows -(M_ii M_jj)^{1/2},
/// highs (M_ii M_jj)^{1/2}; Z in [0, z*] on the diagonal and [-z*, z*] off it;
/// z bounds by sign of each coefficient of G.
Box initial_box(const LtiSystem& sys, double lambda, const SymMatrix& m, const SolverOptions& opts = {});

/// max(zlo x + xlo z - xlo zlo, zhi x + xhi z - xhi zhi). Throws domain outside
/// the rectangle (with a 1e-9 relative allowance for solver points).
double convex_envelope(double x_lo, double x_hi, double z_lo, double z_hi, double x, double z);

struct Relaxation {
  bool feasible = false;
  double value = 0.0;           // underestimator minimum
  double true_objective = 0.0;  // tr((C X C^T + R) Z) at the minimizer
  SymMatrix X, Z, S;
  SdpStatus status = SdpStatus::kIterationLimit;
};

Relaxation solve_relaxation(const Box& box, const LtiSystem& sys, double lambda, const SymMatrix& m,
                            const SolverOptions& opts = {});

struct BnbNode {
  Box box;
  double nu = 0.0;
  Relaxation point;
  int stage = 0;
  int child = 0;
};

/// x_k z_k - envelope at the node point, per representative coordinate.
Vector envelope_gaps(const BnbNode& node, const Matrix& g);

/// Four children split at the node point (x^, z^) in the coordinate with the
/// largest gap: x in [lo, x^] with z in [lo, z^], then [x^, hi] x [lo, z^],
/// [x^, hi] x [z^, hi] and [lo, x^] x [z^, hi]. The split point is kept at least
/// 1% of the width from each edge.
std::vector<Box> split(const BnbNode& node, const Matrix& g);

struct BnbStage {
  int stage = 0;
  double nu = 0.0;
  double upsilon = 0.0;
  int open = 0;
};

enum class BnbStatus { kEpsOptimal, kNodeLimit };
const char* to_string(BnbStatus s);

struct BnbOptions {
  double eps = 0.0;      // <= 0: 1e-4 times the root upper bound scale
  int node_cap = 10000;  // relaxations solved
  bool parallel = true;  // children solved concurrently
  SolverOptions sdp = [] {
    SolverOptions o;
    o.allow_widening = false;
    return o;
  }();
};

struct BnbResult {
  SymMatrix X_star, Z_star, S_star;
  double upsilon_star = 0.0;  // final lower bound
  double Upsilon_star = 0.0;  // incumbent objective
  double eps = 0.0;
  int stages = 0;
  int nodes = 0;
  BnbStatus status = BnbStatus::kNodeLimit;
  Box root;
  std::vector<BnbStage> trace;
};

BnbResult design_closed(const LtiSystem& sys, double lambda, const SymMatrix& m, const BnbOptions& opts = {});

/// Smallest normalized distance of the incumbent to the root box boundary.
double boundary_check(const BnbResult& result, const Box& box, const Matrix& c);

}  // namespace crsn
