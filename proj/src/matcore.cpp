#include "crsn/matcore.hpp"

#include <cmath>
#include <limits>

#include <Eigen/Eigenvalues>

namespace crsn {

void require_finite(const Matrix& m, const char* what) {
  if (!m.allFinite()) {
    throw Error(ErrorCode::kInvalidInput, std::string(what) + " has non-finite entries");
  }
}

Matrix symmetrize(const Matrix& m) { return 0.5 * (m + m.transpose()); }

SymMatrix::SymMatrix(const Matrix& m) {
  if (m.rows() != m.cols()) {
    throw Error(ErrorCode::kDimensionMismatch, "symmetric matrix must be square");
  }
  require_finite(m, "symmetric matrix");
  m_ = symmetrize(m);
}

SymMatrix SymMatrix::inverse() const {
  Eigen::LLT<Matrix> llt(m_);
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorCode::kInvalidInput, "matrix is not positive definite");
  }
  return SymMatrix(llt.solve(Matrix::Identity(dim(), dim())));
}

SymMatrix SymMatrix::operator+(const SymMatrix& o) const {
  if (o.dim() != dim()) throw Error(ErrorCode::kDimensionMismatch, "sum of symmetric matrices");
  return SymMatrix(m_ + o.m_);
}

SymMatrix SymMatrix::operator-(const SymMatrix& o) const {
  if (o.dim() != dim()) throw Error(ErrorCode::kDimensionMismatch, "difference of symmetric matrices");
  return SymMatrix(m_ - o.m_);
}

namespace {

Eigen::SelfAdjointEigenSolver<Matrix> eigen_of(const SymMatrix& a, bool vectors) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(a.mat(), vectors ? Eigen::ComputeEigenvectors
                                                             : Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) {
    throw Error(ErrorCode::kInternal, "symmetric eigensolver failed");
  }
  return es;
}

}  // namespace

Vector eigenvalues(const SymMatrix& a) {
  if (a.dim() == 0) return Vector();
  return eigen_of(a, false).eigenvalues();
}

double min_eigenvalue(const SymMatrix& a) {
  if (a.dim() == 1) return a(0, 0);
  return eigenvalues(a).minCoeff();
}

double max_eigenvalue(const SymMatrix& a) {
  if (a.dim() == 1) return a(0, 0);
  return eigenvalues(a).maxCoeff();
}

double spectral_norm(const SymMatrix& a) {
  if (a.dim() == 0) return 0.0;
  return eigenvalues(a).cwiseAbs().maxCoeff();
}

double spectral_radius(const Matrix& a) {
  if (a.rows() != a.cols()) throw Error(ErrorCode::kDimensionMismatch, "spectral radius of non-square matrix");
  require_finite(a, "matrix");
  if (a.rows() == 1) return std::abs(a(0, 0));
  Eigen::EigenSolver<Matrix> es(a, false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

double condition_number(const SymMatrix& a) {
  const Vector ev = eigenvalues(a);
  if (ev.minCoeff() <= 0.0) return std::numeric_limits<double>::infinity();
  return ev.maxCoeff() / ev.minCoeff();
}

SymMatrix psd_project(const SymMatrix& a) {
  if (a.dim() == 1) return SymMatrix::scalar(std::max(0.0, a(0, 0)));
  const auto es = eigen_of(a, true);
  const Vector d = es.eigenvalues().cwiseMax(0.0);
  return SymMatrix(es.eigenvectors() * d.asDiagonal() * es.eigenvectors().transpose());
}

SymMatrix psd_sqrt(const SymMatrix& a) {
  if (a.dim() == 1) return SymMatrix::scalar(std::sqrt(std::max(0.0, a(0, 0))));
  const auto es = eigen_of(a, true);
  const Vector d = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return SymMatrix(es.eigenvectors() * d.asDiagonal() * es.eigenvectors().transpose());
}

double psd_tolerance(const SymMatrix& a) { return 1e-8 * std::max(1.0, spectral_norm(a)); }

bool is_psd(const SymMatrix& a) { return min_eigenvalue(a) >= -psd_tolerance(a); }

bool psd_leq(const SymMatrix& lhs, const SymMatrix& rhs, double abs_slack) {
  const double scale = std::max({1.0, spectral_norm(lhs), spectral_norm(rhs)});
  return min_eigenvalue(rhs - lhs) >= -1e-8 * scale - abs_slack;
}

Vector vec(const Matrix& m) { return Eigen::Map<const Vector>(m.data(), m.size()); }

Matrix unvec(const Vector& v, int rows, int cols) {
  if (v.size() != static_cast<Eigen::Index>(rows) * cols) {
    throw Error(ErrorCode::kDimensionMismatch, "unvec size");
  }
  return Eigen::Map<const Matrix>(v.data(), rows, cols);
}

int vech_size(int n) { return n * (n + 1) / 2; }

int vech_index(int i, int j, int n) {
  if (i < j) std::swap(i, j);
  // Column j of the lower triangle starts after columns 0..j-1, of lengths n, n-1, ...
  return j * n - j * (j - 1) / 2 + (i - j);
}

Vector vech(const SymMatrix& a) {
  const int n = a.dim();
  Vector out(vech_size(n));
  int k = 0;
  for (int j = 0; j < n; ++j) {
    for (int i = j; i < n; ++i) out(k++) = a(i, j);
  }
  return out;
}

SymMatrix unvech(const Vector& v) {
  const double nd = (std::sqrt(8.0 * static_cast<double>(v.size()) + 1.0) - 1.0) / 2.0;
  const int n = static_cast<int>(std::lround(nd));
  if (vech_size(n) != v.size()) throw Error(ErrorCode::kDimensionMismatch, "unvech length is not triangular");
  Matrix m(n, n);
  int k = 0;
  for (int j = 0; j < n; ++j) {
    for (int i = j; i < n; ++i) {
      m(i, j) = v(k);
      m(j, i) = v(k);
      ++k;
    }
  }
  return SymMatrix(m);
}

Matrix duplication_matrix(int n) {
  Matrix d = Matrix::Zero(n * n, vech_size(n));
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) d(j * n + i, vech_index(i, j, n)) = 1.0;
  }
  return d;
}

Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return out;
}

}  // namespace crsn
