#include "manppa/manppa.hpp"

#include "manppa/geometry.hpp"

#include <chrono>
#include <cmath>

namespace manppa {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(const Clock::time_point& start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

Vector retract(const Vector& v, const Matrix* deflate) {
  if (deflate != nullptr && deflate->cols() > 0) {
    return project_sphere(v - *deflate * (deflate->transpose() * v));
  }
  return project_sphere(v);
}

}  // namespace

LineSearchResult line_search(const Matrix& Y, const Vector& x, const Vector& d,
                             double f_x, double t, double beta, int max_backtracks,
                             const Matrix* deflate) {
  LineSearchResult res;
  const double d_sq = d.squaredNorm();
  if (d_sq == 0.0) {
    res.alpha = 1.0;
    res.backtracks = 0;
    res.f_new = f_x;
    res.x_new = x;
    return res;
  }
  double alpha = 1.0;
  for (int j = 0; j <= max_backtracks; ++j) {
    Vector xn = retract(x + alpha * d, deflate);
    const double fn = objective(Y, xn);
    if (fn <= f_x - alpha / (2.0 * t) * d_sq) {
      res.alpha = alpha;
      res.backtracks = j;
      res.f_new = fn;
      res.x_new = std::move(xn);
      return res;
    }
    alpha *= beta;
  }
  throw LineSearchStall("line_search: no sufficient decrease within " +
                        std::to_string(max_backtracks) + " backtracks");
}

SolveResult manppa_solve(const Matrix& Y, const SpherePoint& x0,
                         const ManppaConfig& cfg, const MetricHook& metric) {
  return manppa_solve_orth(Y, x0, Matrix(), cfg, metric);
}

SolveResult manppa_solve_orth(const Matrix& Y, const SpherePoint& x0,
                              const Matrix& extra_orth, const ManppaConfig& cfg,
                              const MetricHook& metric) {
  validate_data_matrix(Y, "manppa_solve");
  if (!(cfg.beta > 0.0 && cfg.beta < 1.0)) {
    throw DegenerateInput("manppa_solve: beta must lie in (0,1)");
  }
  const bool constrained = extra_orth.cols() > 0;

  SolveResult out;
  out.x = x0.v;
  out.trace.solver = constrained ? "seq-manppa" : "manppa";
  out.trace.layout = constrained ? TraceLayout::kPerColumn : TraceLayout::kBase;
  out.trace.t = cfg.t;
  out.trace.initial_objective = objective(Y, out.x);
  if (metric) out.trace.initial_metric = metric(out.x);
  out.status = "max_iters";

  double f = out.trace.initial_objective;
  SubproblemSolution warm;
  bool have_warm = false;

  for (int k = 0; k < cfg.max_iters; ++k) {
    const auto iter_start = Clock::now();
    const double eps_k =
        std::max(cfg.eps0 * std::pow(cfg.eps_decay, k), cfg.eps_floor);
    const SubproblemSpec spec = make_subproblem_spec(Y, out.x, cfg.t, extra_orth);
    SubproblemSolution sol =
        alm_solve(spec, eps_k, cfg.alm, have_warm ? &warm : nullptr);
    const double d_norm = sol.d.norm();

    TraceRecord rec;
    rec.k = k;
    rec.alm_iters = sol.alm_iters;
    rec.ssn_iters = sol.ssn_iters;
    rec.d_norm = d_norm;

    if (d_norm <= cfg.d_norm_tol) {
      // Stationary for the subproblem: record the unchanged iterate and stop.
      rec.alpha = 1.0;
      rec.objective = f;
      if (metric) rec.metric = metric(out.x);
      rec.wall_seconds = seconds_since(iter_start);
      out.trace.records.push_back(rec);
      out.status = "converged";
      return out;
    }

    const LineSearchResult ls =
        line_search(Y, out.x, sol.d, f, cfg.t, cfg.beta, cfg.max_backtracks,
                    constrained ? &extra_orth : nullptr);
    out.x = ls.x_new;
    const double f_prev = f;
    f = ls.f_new;

    rec.alpha = ls.alpha;
    rec.objective = f;
    if (metric) rec.metric = metric(out.x);
    rec.wall_seconds = seconds_since(iter_start);
    out.trace.records.push_back(rec);

    warm = std::move(sol);
    have_warm = true;

    const double rel = f_prev > 0.0 ? std::abs(f - f_prev) / f_prev : 0.0;
    if (rel <= cfg.rel_obj_tol) {
      out.status = "converged";
      return out;
    }
  }
  return out;
}

}  // namespace manppa
