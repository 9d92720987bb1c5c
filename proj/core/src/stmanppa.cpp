#include "manppa/stmanppa.hpp"

#include "manppa/geometry.hpp"

#include <chrono>
#include <cmath>

namespace manppa {

ClosedFormStep closed_form_step(const Vector& x, const Vector& y, double t) {
  if (x.size() != y.size() || x.size() == 0) {
    throw DegenerateInput("closed_form_step: size mismatch");
  }
  if (std::abs(x.norm() - 1.0) > kUnitNormTol) {
    throw DegenerateInput("closed_form_step: base point not unit norm");
  }
  if (!(t >= 1e-12 && t <= 1e6)) {
    throw DegenerateInput("closed_form_step: step t out of range (1e-12..1e6)");
  }
  const double mu = t * y.dot(x);
  const double y_sq = y.squaredNorm();

  ClosedFormStep out;
  if ((1.0 + mu) * mu / t - t * y_sq > 0.0) {
    out.step_case = StepCase::kPositiveSide;
    out.d = mu * x - t * y;
  } else if ((1.0 - mu) * mu / t + t * y_sq < 0.0) {
    out.step_case = StepCase::kNegativeSide;
    out.d = -mu * x + t * y;
  } else {
    out.step_case = StepCase::kZeroSet;
    const double denom = t * t * y_sq - mu * mu;
    if (denom <= 0.0 || mu == 0.0) {
      // y parallel to x (or y = 0): the objective is already minimal at d = 0.
      out.d = Vector::Zero(x.size());
    } else {
      out.d = (mu * mu * x - t * mu * y) / denom;
    }
  }
  return out;
}

SolveResult stmanppa_solve(const Matrix& Y, const SpherePoint& x0,
                           const StmanppaConfig& cfg, std::uint64_t seed,
                           const MetricHook& metric) {
  using Clock = std::chrono::steady_clock;
  validate_data_matrix(Y, "stmanppa_solve");
  if (Y.rows() != x0.size()) {
    throw DegenerateInput("stmanppa_solve: dimension mismatch");
  }
  if (!(cfg.beta > 0.0 && cfg.beta < 1.0) || !(cfg.t0 > 0.0) || cfg.epochs < 1) {
    throw DegenerateInput("stmanppa_solve: invalid configuration");
  }
  const Index p = Y.cols();

  CounterRng base(seed);
  CounterRng col_rng = base.derive(0);
  CounterRng reservoir_rng = base.derive(1);

  SolveResult out;
  out.x = x0.v;
  out.trace.solver = "stmanppa";
  out.trace.layout = TraceLayout::kStochastic;
  out.trace.t = cfg.t0;
  out.trace.initial_objective = objective(Y, out.x);
  if (metric) out.trace.initial_metric = metric(out.x);
  out.status = "max_iters";

  Vector reservoir = out.x;
  double weight_total = 0.0;

  double f = out.trace.initial_objective;
  int step_index = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto epoch_start = Clock::now();
    const double t_k = cfg.t0 * std::pow(cfg.beta, epoch);
    if (t_k < 1e-12) {
      // The schedule has decayed to numerically nil steps; further epochs
      // cannot move the iterate.
      out.status = "converged";
      break;
    }
    double last_d_norm = 0.0;
    StepCase last_case = StepCase::kZeroSet;

    for (Index s = 0; s < p; ++s, ++step_index) {
      const Index j = static_cast<Index>(col_rng.next_below(static_cast<std::uint64_t>(p)));
      ClosedFormStep step = closed_form_step(out.x, Y.col(j), t_k);
      last_d_norm = step.d.norm();
      last_case = step.step_case;
      out.x = project_sphere(out.x + step.d);

      // Weighted reservoir draw: after step k the stored iterate equals x^k
      // with probability t_k / sum of step sizes so far.
      weight_total += t_k;
      if (reservoir_rng.next_unit() < t_k / weight_total) {
        reservoir = out.x;
      }
    }

    const double f_new = objective(Y, out.x);
    TraceRecord rec;
    rec.k = step_index - 1;
    rec.epoch = epoch;
    rec.objective = f_new;
    if (metric) rec.metric = metric(out.x);
    rec.alpha = 1.0;
    rec.d_norm = last_d_norm;
    rec.t_k = t_k;
    rec.step_case = static_cast<int>(last_case);
    rec.wall_seconds =
        std::chrono::duration<double>(Clock::now() - epoch_start).count();
    out.trace.records.push_back(rec);

    const double rel = f > 0.0 ? std::abs(f_new - f) / f : 0.0;
    f = f_new;
    if (rel <= cfg.rel_obj_tol) {
      out.status = "converged";
      break;
    }
  }

  if (cfg.output == StmanppaConfig::Output::kWeightedRandom) {
    out.x = reservoir;
  }
  return out;
}

}  // namespace manppa
