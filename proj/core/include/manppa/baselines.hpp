#pragma once

#include "manppa/manppa.hpp"
#include "manppa/types.hpp"

namespace manppa {

// Step-size schedules shared by the subgradient baselines.
struct ScheduleConfig {
  enum class Kind { kConstant, kGeometric, kPiecewise };
  Kind kind = Kind::kGeometric;
  double eta0 = 0.1;
  double ratio = 0.9;
  int phase = 50;  // iterations per decay stage
  int k0 = 0;      // burn-in offset of the piecewise schedule
};
double schedule_eta(const ScheduleConfig& cfg, int k);

struct SubgradConfig {
  ScheduleConfig schedule;
  int max_iters = 500;
  double rel_obj_tol = 0.0;  // ≤ 0 disables the relative-change stop
};

// Euclidean projected subgradient: x ← P_sphere(x - eta_k·Y·sgn(Yᵀx)).
SolveResult psgm_solve(const Matrix& Y, const SpherePoint& x0,
                       const SubgradConfig& cfg = {}, const MetricHook& metric = {});

// Riemannian subgradient: the update direction is projected onto the tangent
// space before stepping.
SolveResult rsgm_solve(const Matrix& Y, const SpherePoint& x0,
                       const SubgradConfig& cfg = {}, const MetricHook& metric = {});

struct MblsConfig {
  double initial_step = 1.0;
  int max_iters = 500;
  double rel_obj_tol = 1e-9;
  int max_halvings = 60;
};

// Projected subgradient with a modified backtracking line search: each
// iteration starts from twice the previously accepted step and halves until
// the objective decreases. When max_halvings halvings fail, the zero step is
// accepted and the iteration stops ("stalled").
SolveResult psgm_mbls_solve(const Matrix& Y, const SpherePoint& x0,
                            const MblsConfig& cfg = {}, const MetricHook& metric = {});

// Mixed ℓ1/ℓ2 column norm ‖YᵀX‖_{1,2} = Σ_j ‖Xᵀy_j‖₂.
double l12_objective(const Matrix& Y, const Matrix& X);

// The same objective with each column residual passed through the Huber
// function at level delta: r ≥ delta ↦ r, r < delta ↦ (r² + delta²)/(2 delta).
// This is the majorization surrogate that the reweighted iteration decreases
// monotonically when its weights are floored at delta.
double l12_objective_floored(const Matrix& Y, const Matrix& X, double delta);

struct IrlsConfig {
  double delta = 1e-8;       // weight floor
  int max_iters = 100;
  double abs_obj_tol = 1e-11;  // stop on |objective change|
};

using MatrixMetricHook = std::function<double(const Matrix&)>;

struct IrlsResult {
  StiefelPoint X;
  IterateTrace trace;
  std::string status;
};

// Iteratively reweighted least squares for min ‖YᵀX‖_{1,2} over orthonormal
// X: X^k collects the q smallest eigenvectors of Y·W_k·Yᵀ with weights
// w_j = 1/max(delta, ‖X^{k-1,ᵀ}y_j‖₂). Initialized at the spectral point
// (q smallest eigenvectors of YYᵀ).
IrlsResult irls_solve(const Matrix& Y, Index q, const IrlsConfig& cfg = {},
                      const MatrixMetricHook& metric = {});

}  // namespace manppa
