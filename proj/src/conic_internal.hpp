#pragma once

#include <vector>

#include "crsn/conic.hpp"

namespace crsn::detail {

inline int svec_size(int d) { return d * (d + 1) / 2; }

/// Lower triangle column by column, off-diagonal entries scaled by sqrt(2) so
/// that the Euclidean inner product matches the trace inner product.
void svec_into(const Matrix& m, Eigen::Ref<Vector> out);
Matrix smat(const Eigen::Ref<const Vector>& v, int d);

/// Problem in the form  min c^T x + c0  s.t.  s = b - A x,  s in C, where C is
/// {0}^n_eq x [lo, hi]^n_int x PSD cones (svec).
struct Compiled {
  Matrix A;
  Vector b, c;
  double c0 = 0.0;
  int n_eq = 0, n_int = 0;
  Vector lo, hi;
  std::vector<int> psd_dims, psd_offsets;
  int rows() const { return static_cast<int>(A.rows()); }
  int cols() const { return static_cast<int>(A.cols()); }
};

Compiled compile(const SdpProblem& p);

/// Fills values, objective and primal infeasibility from an unscaled point.
void finalize(const SdpProblem& p, const Compiled& cp, const Vector& x, SdpSolution& sol);

SdpSolution solve_splitting(const SdpProblem& p, const Compiled& cp, const SolverOptions& opts,
                            const WarmStart* warm);
SdpSolution solve_barrier(const SdpProblem& p, const Compiled& cp, const SolverOptions& opts);

}  // namespace crsn::detail
