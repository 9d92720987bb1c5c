#include "manppa/geometry.hpp"

#include <Eigen/QR>

#include <algorithm>
#include <cmath>

namespace manppa {

Vector project_sphere(const Vector& v) {
  if (v.size() == 0 || !v.allFinite()) {
    throw DegenerateInput("project_sphere: empty or non-finite input");
  }
  const double norm = v.norm();
  if (norm == 0.0) {
    throw DegenerateInput("project_sphere: zero vector has no nearest unit vector");
  }
  return v / norm;
}

Vector tangent_project(const Vector& x, const Vector& g) {
  return g - x * x.dot(g);
}

double objective(const Matrix& Y, const Vector& x) {
  double sum = 0.0;
  for (Index j = 0; j < Y.cols(); ++j) {
    sum += std::abs(Y.col(j).dot(x));
  }
  return sum;
}

double objective(const Matrix& Y, const Matrix& X) {
  // Sum per-column subtotals so the matrix value equals the sum of the
  // vector values bit for bit (the objective is separable in the columns).
  double sum = 0.0;
  for (Index q = 0; q < X.cols(); ++q) {
    sum += objective(Y, Vector(X.col(q)));
  }
  return sum;
}

Vector euclid_subgradient(const Matrix& Y, const Vector& x) {
  Vector g = Vector::Zero(Y.rows());
  for (Index j = 0; j < Y.cols(); ++j) {
    const double s = sign0(Y.col(j).dot(x));
    if (s != 0.0) g += s * Y.col(j);
  }
  return g;
}

Vector riemannian_subgradient(const Matrix& Y, const Vector& x) {
  return tangent_project(x, euclid_subgradient(Y, x));
}

double lipschitz_bound(const Matrix& Y) {
  validate_data_matrix(Y, "lipschitz_bound");
  double sum = 0.0;
  for (Index j = 0; j < Y.cols(); ++j) {
    sum += Y.col(j).norm();
  }
  return sum;
}

double principal_angle(const Vector& x, const SubspaceBasis& S) {
  if (x.size() != S.ambient()) {
    throw DegenerateInput("principal_angle: dimension mismatch");
  }
  const double s = (S.m.transpose() * x).norm();
  return std::asin(std::min(1.0, s));
}

std::pair<double, Index> angle_to_dictionary(const Vector& x, const StiefelPoint& dict) {
  if (x.size() != dict.rows() || dict.cols() < 1) {
    throw DegenerateInput("angle_to_dictionary: dimension mismatch");
  }
  double best_angle = 0.0;
  Index best_j = -1;
  for (Index j = 0; j < dict.cols(); ++j) {
    const double c = std::min(1.0, std::abs(dict.m.col(j).dot(x)));
    const double angle = std::acos(c);
    if (best_j < 0 || angle < best_angle) {
      best_angle = angle;
      best_j = j;
    }
  }
  return {best_angle, best_j};
}

double subspace_recovery_error(const StiefelPoint& X, const SubspaceBasis& S) {
  if (X.rows() != S.ambient()) {
    throw DegenerateInput("subspace_recovery_error: dimension mismatch");
  }
  const Index n = X.rows();
  const Matrix proj = X.m * X.m.transpose();
  const Matrix target = Matrix::Identity(n, n) - S.m * S.m.transpose();
  return (proj - target).norm();
}

QrFactors qr_positive(const Matrix& A) {
  validate_data_matrix(A, "qr_positive");
  if (A.cols() > A.rows()) {
    throw DegenerateInput("qr_positive: more columns than rows");
  }
  Eigen::HouseholderQR<Matrix> qr(A);
  const Index k = A.cols();
  Matrix Q = qr.householderQ() * Matrix::Identity(A.rows(), k);
  Matrix R = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
  for (Index i = 0; i < k; ++i) {
    if (R(i, i) < 0.0) {
      Q.col(i) = -Q.col(i);
      R.row(i) = -R.row(i);
    } else if (R(i, i) == 0.0) {
      throw DegenerateInput("qr_positive: rank deficient input");
    }
  }
  return {std::move(Q), std::move(R)};
}

}  // namespace manppa
