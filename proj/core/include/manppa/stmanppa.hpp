#pragma once

#include "manppa/manppa.hpp"
#include "manppa/rng.hpp"
#include "manppa/types.hpp"

namespace manppa {

// Which branch of the single-column closed form produced the step:
// the inner product y ᵀ(x+d) stays positive, stays negative, or is driven
// exactly onto the kink.
enum class StepCase { kPositiveSide = 1, kNegativeSide = 2, kZeroSet = 3 };

struct ClosedFormStep {
  Vector d;
  StepCase step_case = StepCase::kZeroSet;
};

// Exact minimizer of the single-column tangent subproblem
//   min_d |yᵀ(x+d)| + (1/(2t))‖d‖₂²   s.t.  dᵀx = 0.
// With mu = t·(yᵀx) the step is mu·x - t·y when (1+mu)·mu/t - t‖y‖² > 0,
// -mu·x + t·y when (1-mu)·mu/t + t‖y‖² < 0, and otherwise
// (mu²·x - t·mu·y)/(t²‖y‖² - mu²), where the degenerate 0/0 case (y parallel
// to x, or y = 0) yields d = 0.
ClosedFormStep closed_form_step(const Vector& x, const Vector& y, double t);

struct StmanppaConfig {
  double t0 = 0.6;     // initial step size
  double beta = 0.8;   // per-epoch geometric decay: t_k = t0·beta^epoch
  int epochs = 500;    // an epoch is p sampled columns
  double rel_obj_tol = 1e-12;  // per-epoch relative objective change
  enum class Output { kLast, kWeightedRandom };
  Output output = Output::kLast;
};

// Stochastic variant: each step samples one column uniformly at random and
// applies the closed-form update followed by sphere projection. The trace
// holds one record per epoch. Output is the last iterate or, with
// kWeightedRandom, an iterate drawn with probability proportional to its
// step size (weighted reservoir sampling, so memory stays O(n)).
SolveResult stmanppa_solve(const Matrix& Y, const SpherePoint& x0,
                           const StmanppaConfig& cfg, std::uint64_t seed,
                           const MetricHook& metric = {});

}  // namespace manppa
