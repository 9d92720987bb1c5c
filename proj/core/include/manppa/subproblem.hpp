#pragma once

#include "manppa/types.hpp"

#include <vector>

namespace manppa {

// Entrywise shrinkage: sign(w)·max(|w| - tau, 0).
double soft_threshold(double w, double tau);
Vector soft_threshold(const Vector& w, double tau);

// Tangent-space proximal subproblem at the unit vector x with step t:
//
//   min_d  (1/2)‖d‖₂² + t‖Yᵀd + c‖₁   s.t.  Bᵀd = 0
//
// where c = Yᵀx and B = [extra_orth, x]. With extra_orth empty this is the
// single-vector subproblem; the sequential multi-column solver passes the
// already-fixed columns through extra_orth.
struct SubproblemSpec {
  const Matrix* Y = nullptr;  // n×p data, not owned
  Vector x;                   // unit base point
  double t = 0.1;             // proximal step
  Matrix basis;               // B = [extra_orth, x], n×m with orthonormal columns
  Vector c;                   // Yᵀx, cached

  Index n() const { return x.size(); }
  Index p() const { return Y->cols(); }
  Index m() const { return basis.cols(); }
};

// Validates inputs (finite Y, unit x, t in [1e-12, 1e6], [extra_orth, x]
// orthonormal) and caches c and B. Throws DegenerateInput on violation.
SubproblemSpec make_subproblem_spec(const Matrix& Y, Vector x, double t,
                                    Matrix extra_orth = Matrix());

// Multipliers for the two constraint blocks of the subproblem.
struct DualState {
  Vector y;  // length m: one multiplier per orthogonality constraint
  Vector z;  // length p: multipliers of Yᵀd + c = u
};

// Value and gradient of the inner augmented Lagrangian with u minimized out:
//
//   psi(d) = (1/2)‖d‖² + (sigma/2)‖Bᵀd + y/sigma‖² - ‖y‖²/(2 sigma)
//          + t‖u*‖₁ + (sigma/2)‖w - u*‖² - ‖z‖²/(2 sigma),
//   w = Yᵀd + c + z/sigma,   u* = soft_threshold(w, t/sigma),
//   grad = d + sigma·B(Bᵀd + y/sigma) + sigma·Y(w - u*).
struct PsiEval {
  double value = 0.0;
  Vector grad;
  Vector w;  // shifted residual Yᵀd + c + z/sigma
  Vector u;  // soft_threshold(w, t/sigma)
};
PsiEval psi_value_grad(const SubproblemSpec& spec, const Vector& d,
                       const DualState& dual, double sigma);

// Diagonal of the shrinkage Jacobian: 0 where |w_i| ≤ t/sigma (inactive,
// including the kink boundary), 1 otherwise.
Vector active_diag(const Vector& w, double t, double sigma);

struct SsnResult {
  Vector d;
  double grad_norm = 0.0;
  int iters = 0;
  int cholesky_count = 0;
  bool converged = false;
  // ‖grad psi‖ at every evaluated iterate, starting point included.
  std::vector<double> grad_norms;
};

// Minimizes psi by semismooth Newton steps. Each step factors
// V = I + sigma·Y_J Y_Jᵀ + sigma·B Bᵀ (J = inactive set) with a fresh
// Cholesky decomposition, solves V v = -grad exactly and backtracks with an
// Armijo test (slope fraction `armijo_mu`, step ratio `backtrack`). Returns
// early (converged = false) when the Armijo test cannot certify any further
// decrease at rounding precision; callers treat the iterate as the best
// achievable for this sigma.
SsnResult ssn_solve(const SubproblemSpec& spec, Vector d0, const DualState& dual,
                    double sigma, double grad_tol, int max_iters,
                    double armijo_mu = 0.1, double backtrack = 0.5);

struct AlmConfig {
  double sigma0_factor = 3000.0;  // sigma_0 = sigma0_factor · t
  double sigma_cap = 1e6;
  int max_alm_iters = 30;
  int max_ssn_iters = 20;
  double armijo_mu = 0.1;
  double backtrack = 0.5;
  double shrink = 0.99;  // geometric factor of the inner tolerance schedule
};

struct KktResiduals {
  double stationarity = 0.0;   // ‖d + B y + Y z‖₂
  double primal = 0.0;         // sqrt(‖Yᵀd + c - u‖² + ‖Bᵀd‖²)
  double complementarity = 0.0;  // box violation and sign mismatch of (u, z)
  double max_residual() const;
};
KktResiduals kkt_residuals(const SubproblemSpec& spec, const Vector& d,
                           const Vector& u, const DualState& dual);

struct SubproblemSolution {
  Vector d;
  Vector u;
  DualState dual;
  KktResiduals kkt;
  int alm_iters = 0;
  int ssn_iters = 0;
  int cholesky_count = 0;
  bool converged = false;
  // max(primal residual, ‖grad psi‖) after each multiplier update.
  std::vector<double> outer_residuals;
  // Dual objective cᵀz - (1/2)‖Y z + B y‖² after each multiplier update; the
  // multiplier iterates are dual feasible by construction (z is a clip), so
  // this sequence is nondecreasing up to inner-solve inexactness.
  std::vector<double> dual_values;
};

// Inexact augmented Lagrangian loop: alternates ssn_solve with multiplier
// updates y += sigma·Bᵀd, z += sigma·(Yᵀd + c - u) under the penalty schedule
// sigma_j = min(sigma_cap, 3^(j mod 4)·sigma0_factor·t). Stops once
// max(primal residual, ‖grad psi‖) ≤ eps. A warm start (previous solution)
// may be passed to resume from earlier multipliers.
SubproblemSolution alm_solve(const SubproblemSpec& spec, double eps,
                             const AlmConfig& cfg = {},
                             const SubproblemSolution* warm = nullptr);

}  // namespace manppa
