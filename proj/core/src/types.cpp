#include "manppa/types.hpp"

#include <cmath>

namespace manppa {

void validate_data_matrix(const Matrix& M, const std::string& who) {
  if (M.rows() < 1 || M.cols() < 1) {
    throw DegenerateInput(who + ": matrix must be non-empty, got " +
                          std::to_string(M.rows()) + "x" + std::to_string(M.cols()));
  }
  if (!M.allFinite()) {
    throw DegenerateInput(who + ": matrix has non-finite entries");
  }
}

SpherePoint SpherePoint::make(Vector v) {
  if (v.size() == 0 || !v.allFinite()) {
    throw DegenerateInput("SpherePoint: empty or non-finite vector");
  }
  const double norm = v.norm();
  if (std::abs(norm - 1.0) > kUnitNormTol) {
    throw DegenerateInput("SpherePoint: norm deviates from 1 by " +
                          std::to_string(std::abs(norm - 1.0)));
  }
  return SpherePoint{std::move(v)};
}

TangentVector TangentVector::make(Vector base, Vector dir) {
  SpherePoint::make(base);  // validates the base point
  if (dir.size() != base.size() || !dir.allFinite()) {
    throw DegenerateInput("TangentVector: direction size mismatch or non-finite");
  }
  const double inner = std::abs(base.dot(dir));
  if (inner > kOrthoTol * std::max(1.0, dir.norm())) {
    throw DegenerateInput("TangentVector: direction not orthogonal to base, |<x,d>| = " +
                          std::to_string(inner));
  }
  return TangentVector{std::move(base), std::move(dir)};
}

StiefelPoint StiefelPoint::make(Matrix m) {
  validate_data_matrix(m, "StiefelPoint");
  if (m.cols() > m.rows()) {
    throw DegenerateInput("StiefelPoint: more columns than rows");
  }
  const Matrix gram = m.transpose() * m;
  const double err = (gram - Matrix::Identity(m.cols(), m.cols())).cwiseAbs().maxCoeff();
  if (err > kOrthoTol) {
    throw DegenerateInput("StiefelPoint: columns not orthonormal, max |XᵀX - I| = " +
                          std::to_string(err));
  }
  return StiefelPoint{std::move(m)};
}

SubspaceBasis SubspaceBasis::make(Matrix m) {
  StiefelPoint checked = StiefelPoint::make(std::move(m));
  return SubspaceBasis{std::move(checked.m)};
}

}  // namespace manppa
