#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace manppa {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

// Raised when an input violates a documented precondition (zero vectors,
// non-orthonormal bases, non-symmetric matrices, malformed data, ...).
struct DegenerateInput : std::runtime_error {
  explicit DegenerateInput(const std::string& what) : std::runtime_error(what) {}
};

// Raised when a backtracking line search exhausts its halving budget without
// finding sufficient decrease.
struct LineSearchStall : std::runtime_error {
  explicit LineSearchStall(const std::string& what) : std::runtime_error(what) {}
};

// Raised when a file cannot be read, parsed or written.
struct IoError : std::runtime_error {
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

// Tolerance used when validating unit norms and orthonormality of inputs.
inline constexpr double kUnitNormTol = 1e-12;
inline constexpr double kOrthoTol = 1e-10;

// Throws DegenerateInput unless M is non-empty with finite entries.
void validate_data_matrix(const Matrix& M, const std::string& who);

// A unit-norm vector. `make` validates ‖v‖₂ = 1 up to kUnitNormTol.
struct SpherePoint {
  Vector v;
  static SpherePoint make(Vector v);
  Index size() const { return v.size(); }
};

// A vector in the tangent space of the sphere at `base` (baseᵀdir = 0 up to
// kOrthoTol·max(1, ‖dir‖₂)).
struct TangentVector {
  Vector base;
  Vector dir;
  static TangentVector make(Vector base, Vector dir);
};

// An n×q matrix with orthonormal columns (XᵀX = I up to kOrthoTol).
struct StiefelPoint {
  Matrix m;
  static StiefelPoint make(Matrix m);
  Index rows() const { return m.rows(); }
  Index cols() const { return m.cols(); }
};

// An orthonormal basis of a linear subspace, stored column-wise.
struct SubspaceBasis {
  Matrix m;
  static SubspaceBasis make(Matrix m);
  Index dim() const { return m.cols(); }
  Index ambient() const { return m.rows(); }
};

}  // namespace manppa
