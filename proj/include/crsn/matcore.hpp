#pragma once

#include <Eigen/Dense>

#include "crsn/error.hpp"

namespace crsn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Upper bound on state/output dimension for the stack-allocated filter types.
inline constexpr int kMaxFilterDim = 8;

/// Heap-free matrices used on the Monte-Carlo hot path.
using SmallMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor, kMaxFilterDim, kMaxFilterDim>;
using SmallVector = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor, kMaxFilterDim, 1>;

/// Dense symmetric matrix. Entries are stored symmetrized, (A + A^T) / 2, and
/// are always finite.
class SymMatrix {
 public:
  SymMatrix() = default;
  explicit SymMatrix(const Matrix& m);

  static SymMatrix identity(int n) { return SymMatrix(Matrix::Identity(n, n)); }
  static SymMatrix zero(int n) { return SymMatrix(Matrix::Zero(n, n)); }
  static SymMatrix scalar(double v) { return SymMatrix(Matrix::Constant(1, 1, v)); }
  static SymMatrix diagonal(const Vector& d) { return SymMatrix(Matrix(d.asDiagonal())); }

  int dim() const { return static_cast<int>(m_.rows()); }
  const Matrix& mat() const { return m_; }
  double operator()(int i, int j) const { return m_(i, j); }
  double trace() const { return m_.trace(); }
  double frobenius() const { return m_.norm(); }

  /// Inverse via Cholesky; throws invalid-input if not positive definite.
  SymMatrix inverse() const;

  SymMatrix operator+(const SymMatrix& o) const;
  SymMatrix operator-(const SymMatrix& o) const;
  SymMatrix operator*(double s) const { return SymMatrix(m_ * s); }
  friend SymMatrix operator*(double s, const SymMatrix& a) { return a * s; }

 private:
  Matrix m_;
};

Matrix symmetrize(const Matrix& m);
void require_finite(const Matrix& m, const char* what);

Vector eigenvalues(const SymMatrix& a);
double min_eigenvalue(const SymMatrix& a);
double max_eigenvalue(const SymMatrix& a);
/// Largest absolute eigenvalue (operator 2-norm of a symmetric matrix).
double spectral_norm(const SymMatrix& a);
/// Spectral radius of a general square matrix.
double spectral_radius(const Matrix& a);
/// cond_2 of a positive definite matrix; +inf when not PD.
double condition_number(const SymMatrix& a);

/// Frobenius-nearest PSD matrix: negative eigenvalues clamped to zero.
SymMatrix psd_project(const SymMatrix& a);
/// Symmetric square root of the PSD part of `a`.
SymMatrix psd_sqrt(const SymMatrix& a);

/// Absolute PSD tolerance for a matrix of this size: 1e-8 * max(1, ||a||_2).
double psd_tolerance(const SymMatrix& a);
bool is_psd(const SymMatrix& a);
/// lhs <= rhs in the Loewner order, up to psd_tolerance of the difference scale.
bool psd_leq(const SymMatrix& lhs, const SymMatrix& rhs, double abs_slack = 0.0);

Vector vec(const Matrix& m);
Matrix unvec(const Vector& v, int rows, int cols);
/// Lower triangle stacked column by column.
Vector vech(const SymMatrix& a);
SymMatrix unvech(const Vector& v);
/// Position of entry (i, j) (either order) inside vech for dimension n.
int vech_index(int i, int j, int n);
int vech_size(int n);
/// Duplication matrix D with vec(X) = D * vech(X) for symmetric X.
Matrix duplication_matrix(int n);
Matrix kron(const Matrix& a, const Matrix& b);

}  // namespace crsn
