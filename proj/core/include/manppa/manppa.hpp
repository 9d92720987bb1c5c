#pragma once

#include "manppa/subproblem.hpp"
#include "manppa/trace.hpp"
#include "manppa/types.hpp"

#include <functional>
#include <string>

namespace manppa {

struct ManppaConfig {
  double t = 0.1;            // proximal step of the tangent subproblem
  double beta = 0.5;         // line search backtracking ratio
  int max_iters = 100;
  double rel_obj_tol = 1e-9;   // stop on |f_k - f_{k-1}| / f_{k-1}
  double d_norm_tol = 1e-14;   // stop when the subproblem step vanishes
  int max_backtracks = 60;
  double eps0 = 1.0;           // subproblem tolerance eps_k = max(eps0·decay^k, floor)
  double eps_decay = 0.1;
  double eps_floor = 1e-12;
  AlmConfig alm;
};

struct LineSearchResult {
  double alpha = 1.0;
  int backtracks = 0;
  double f_new = 0.0;
  Vector x_new;
};

// Finds the smallest j ≥ 0 with
//   f(retract(x + beta^j d)) ≤ f(x) - (beta^j / (2t))·‖d‖²,
// where retract(v) first removes the span of `deflate` (when given) and then
// normalizes. d = 0 returns alpha = 1 with x unchanged. Throws LineSearchStall
// after max_backtracks failures.
LineSearchResult line_search(const Matrix& Y, const Vector& x, const Vector& d,
                             double f_x, double t, double beta, int max_backtracks,
                             const Matrix* deflate = nullptr);

// Optional per-iterate recovery metric recorded into the trace.
using MetricHook = std::function<double(const Vector&)>;

struct SolveResult {
  Vector x;
  IterateTrace trace;
  std::string status;  // "converged" or "max_iters"
};

// Manifold proximal point iteration for min ‖Yᵀx‖₁ over the unit sphere:
// each outer iteration solves the tangent proximal subproblem with alm_solve
// (warm-started, tolerance eps_k), line-searches along the step and retracts.
SolveResult manppa_solve(const Matrix& Y, const SpherePoint& x0,
                         const ManppaConfig& cfg = {}, const MetricHook& metric = {});

// Same iteration restricted to the unit sphere of span{extra_orth}⊥; used by
// the sequential multi-column solver. x0 must be orthogonal to extra_orth.
SolveResult manppa_solve_orth(const Matrix& Y, const SpherePoint& x0,
                              const Matrix& extra_orth, const ManppaConfig& cfg = {},
                              const MetricHook& metric = {});

}  // namespace manppa
