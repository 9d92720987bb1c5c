#pragma once

#include "manppa/types.hpp"

#include <utility>

namespace manppa {

// sign with sign(0) = 0, applied entrywise by the subgradient helpers.
inline double sign0(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

// v / ‖v‖₂, the closest point on the unit sphere. Throws DegenerateInput for
// the zero vector (every unit vector is equally close).
Vector project_sphere(const Vector& v);

// (I - xxᵀ)g, the orthogonal projection of g onto the tangent space at x.
Vector tangent_project(const Vector& x, const Vector& g);

// f(x) = ‖Yᵀx‖₁, summed in fixed column order for run-to-run determinism.
double objective(const Matrix& Y, const Vector& x);

// Entrywise ℓ1 objective ‖YᵀX‖₁ for the orthonormal multi-column problem.
double objective(const Matrix& Y, const Matrix& X);

// Y·sgn(Yᵀx) with sgn(0) = 0; an element of the Euclidean subdifferential.
Vector euclid_subgradient(const Matrix& Y, const Vector& x);

// (I - xxᵀ)·Y·sgn(Yᵀx); an element of the Riemannian subdifferential.
Vector riemannian_subgradient(const Matrix& Y, const Vector& x);

// Σ_j ‖y_j‖₂, an upper bound on the ℓ2 Lipschitz constant of x ↦ ‖Yᵀx‖₁:
// |f(x) - f(z)| ≤ Σ_j |y_jᵀ(x-z)| ≤ (Σ_j ‖y_j‖₂)·‖x - z‖₂.
double lipschitz_bound(const Matrix& Y);

// arcsin(min(1, ‖Sᵀx‖₂)): the angle between x and the orthogonal complement
// of span(S). Zero iff x ⊥ span(S).
double principal_angle(const Vector& x, const SubspaceBasis& S);

// Smallest angle between x and any signed dictionary column:
// min_j arccos(min(1, |x̂_jᵀx|)). Returns (angle, column index); on ties the
// smallest index wins. Throws DegenerateInput when sizes are incompatible.
std::pair<double, Index> angle_to_dictionary(const Vector& x, const StiefelPoint& dict);

// ‖XXᵀ - (I - SSᵀ)‖_F: distance between the span of X and the orthogonal
// complement of span(S), used as the multi-column recovery metric.
double subspace_recovery_error(const StiefelPoint& X, const SubspaceBasis& S);

// Thin Householder QR with the sign convention diag(R) > 0, which makes the
// factor pair unique for full column rank input.
struct QrFactors {
  Matrix Q;  // n×k, orthonormal columns
  Matrix R;  // k×k, upper triangular with positive diagonal
};
QrFactors qr_positive(const Matrix& A);

}  // namespace manppa
