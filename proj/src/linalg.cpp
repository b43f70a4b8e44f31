#include "reparam/linalg.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "reparam/errors.hpp"

namespace reparam {

namespace {

Index numerical_rank(const Eigen::JacobiSVD<Matrix>& svd, double rel_tol) {
  const Vector& s = svd.singularValues();
  if (s.size() == 0 || s[0] == 0.0) return 0;
  Index r = 0;
  while (r < s.size() && s[r] > rel_tol * s[0]) ++r;
  return r;
}

}  // namespace

Matrix symmetric_expm(const Matrix& s) {
  if (!s.allFinite()) throw NumericalError("matrix exponential of non-finite matrix");
  Eigen::SelfAdjointEigenSolver<Matrix> eig(s);
  if (eig.info() != Eigen::Success) throw NumericalError("eigendecomposition failed");
  const Matrix& v = eig.eigenvectors();
  return v * eig.eigenvalues().array().exp().matrix().asDiagonal() * v.transpose();
}

Vector symmetric_expm_apply(const Matrix& s, const Vector& x) {
  if (!s.allFinite() || !x.allFinite()) throw NumericalError("matrix exponential of non-finite input");
  Eigen::SelfAdjointEigenSolver<Matrix> eig(s);
  if (eig.info() != Eigen::Success) throw NumericalError("eigendecomposition failed");
  const Matrix& v = eig.eigenvectors();
  const Vector coeffs = v.transpose() * x;
  return v * (eig.eigenvalues().array().exp() * coeffs.array()).matrix();
}

Matrix row_space_basis(const Matrix& a, double rel_tol) {
  Eigen::JacobiSVD<Matrix> svd(a, Eigen::ComputeFullV);
  return svd.matrixV().leftCols(numerical_rank(svd, rel_tol));
}

Matrix null_space_basis(const Matrix& a, double rel_tol) {
  Eigen::JacobiSVD<Matrix> svd(a, Eigen::ComputeFullV);
  const Index r = numerical_rank(svd, rel_tol);
  return svd.matrixV().rightCols(a.cols() - r);
}

double distance_to_span(const Matrix& basis, const Vector& v) {
  if (basis.cols() == 0) return v.norm();
  return (v - basis * (basis.transpose() * v)).norm();
}

}  // namespace reparam
