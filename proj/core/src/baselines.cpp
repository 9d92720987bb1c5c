#include "manppa/baselines.hpp"

#include "manppa/eigensolver.hpp"
#include "manppa/geometry.hpp"

#include <chrono>
#include <cmath>

namespace manppa {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(const Clock::time_point& start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

SolveResult subgrad_loop(const Matrix& Y, const SpherePoint& x0,
                         const SubgradConfig& cfg, const MetricHook& metric,
                         bool riemannian, const char* name) {
  validate_data_matrix(Y, name);
  SolveResult out;
  out.x = x0.v;
  out.trace.solver = name;
  out.trace.initial_objective = objective(Y, out.x);
  if (metric) out.trace.initial_metric = metric(out.x);
  out.status = "max_iters";

  double f = out.trace.initial_objective;
  for (int k = 0; k < cfg.max_iters; ++k) {
    const auto start = Clock::now();
    const double eta = schedule_eta(cfg.schedule, k);
    const Vector g = riemannian ? riemannian_subgradient(Y, out.x)
                                : euclid_subgradient(Y, out.x);
    const Vector v = out.x - eta * g;
    if (v.norm() == 0.0) {
      throw DegenerateInput(std::string(name) +
                            ": update cancelled the iterate exactly");
    }
    out.x = project_sphere(v);
    const double f_prev = f;
    f = objective(Y, out.x);

    TraceRecord rec;
    rec.k = k;
    rec.objective = f;
    if (metric) rec.metric = metric(out.x);
    rec.alpha = eta;
    rec.d_norm = eta * g.norm();
    rec.wall_seconds = seconds_since(start);
    out.trace.records.push_back(rec);

    if (cfg.rel_obj_tol > 0.0 && f_prev > 0.0 &&
        std::abs(f - f_prev) / f_prev <= cfg.rel_obj_tol) {
      out.status = "converged";
      break;
    }
  }
  return out;
}

}  // namespace

double schedule_eta(const ScheduleConfig& cfg, int k) {
  switch (cfg.kind) {
    case ScheduleConfig::Kind::kConstant:
      return cfg.eta0;
    case ScheduleConfig::Kind::kGeometric:
      return cfg.eta0 * std::pow(cfg.ratio, k / std::max(1, cfg.phase));
    case ScheduleConfig::Kind::kPiecewise: {
      const int shifted = std::max(0, k - cfg.k0);
      return cfg.eta0 * std::pow(cfg.ratio, shifted / std::max(1, cfg.phase) + 1);
    }
  }
  return cfg.eta0;
}

SolveResult psgm_solve(const Matrix& Y, const SpherePoint& x0,
                       const SubgradConfig& cfg, const MetricHook& metric) {
  return subgrad_loop(Y, x0, cfg, metric, /*riemannian=*/false, "psgm");
}

SolveResult rsgm_solve(const Matrix& Y, const SpherePoint& x0,
                       const SubgradConfig& cfg, const MetricHook& metric) {
  return subgrad_loop(Y, x0, cfg, metric, /*riemannian=*/true, "rsgm");
}

SolveResult psgm_mbls_solve(const Matrix& Y, const SpherePoint& x0,
                            const MblsConfig& cfg, const MetricHook& metric) {
  validate_data_matrix(Y, "psgm_mbls_solve");
  if (!(cfg.initial_step > 0.0)) {
    throw DegenerateInput("psgm_mbls_solve: initial_step must be positive");
  }
  SolveResult out;
  out.x = x0.v;
  out.trace.solver = "psgm-mbls";
  out.trace.initial_objective = objective(Y, out.x);
  if (metric) out.trace.initial_metric = metric(out.x);
  out.status = "max_iters";

  double f = out.trace.initial_objective;
  double accepted_step = cfg.initial_step;
  for (int k = 0; k < cfg.max_iters; ++k) {
    const auto start = Clock::now();
    const Vector g = euclid_subgradient(Y, out.x);
    double step = 2.0 * accepted_step;
    bool found = false;
    Vector xn;
    double fn = f;
    for (int h = 0; h <= cfg.max_halvings; ++h) {
      const Vector v = out.x - step * g;
      if (v.norm() == 0.0) {
        throw DegenerateInput("psgm_mbls_solve: update cancelled the iterate");
      }
      xn = project_sphere(v);
      fn = objective(Y, xn);
      if (fn < f) {
        found = true;
        break;
      }
      step *= 0.5;
    }

    TraceRecord rec;
    rec.k = k;
    rec.wall_seconds = seconds_since(start);
    if (!found) {
      // Accept the zero step and stop.
      rec.objective = f;
      if (metric) rec.metric = metric(out.x);
      rec.alpha = 0.0;
      rec.d_norm = 0.0;
      out.trace.records.push_back(rec);
      out.status = "stalled";
      return out;
    }
    out.x = xn;
    const double f_prev = f;
    f = fn;
    accepted_step = step;

    rec.objective = f;
    if (metric) rec.metric = metric(out.x);
    rec.alpha = step;
    rec.d_norm = step * g.norm();
    out.trace.records.push_back(rec);

    if (f_prev > 0.0 && std::abs(f - f_prev) / f_prev <= cfg.rel_obj_tol) {
      out.status = "converged";
      return out;
    }
  }
  return out;
}

double l12_objective(const Matrix& Y, const Matrix& X) {
  double sum = 0.0;
  for (Index j = 0; j < Y.cols(); ++j) {
    sum += (X.transpose() * Y.col(j)).norm();
  }
  return sum;
}

double l12_objective_floored(const Matrix& Y, const Matrix& X, double delta) {
  double sum = 0.0;
  for (Index j = 0; j < Y.cols(); ++j) {
    const double r = (X.transpose() * Y.col(j)).norm();
    sum += r >= delta ? r : (r * r + delta * delta) / (2.0 * delta);
  }
  return sum;
}

IrlsResult irls_solve(const Matrix& Y, Index q, const IrlsConfig& cfg,
                      const MatrixMetricHook& metric) {
  validate_data_matrix(Y, "irls_solve");
  if (q < 1 || q > Y.rows()) {
    throw DegenerateInput("irls_solve: q out of range");
  }
  if (!(cfg.delta > 0.0)) {
    throw DegenerateInput("irls_solve: delta must be positive");
  }
  const Index p = Y.cols();

  IrlsResult out;
  Matrix X = smallest_eigvecs(Y * Y.transpose(), q);
  out.trace.solver = "irls";
  out.trace.initial_objective = l12_objective(Y, X);
  if (metric) out.trace.initial_metric = metric(X);
  out.status = "max_iters";

  double f = out.trace.initial_objective;
  for (int k = 0; k < cfg.max_iters; ++k) {
    const auto start = Clock::now();
    Vector w(p);
    for (Index j = 0; j < p; ++j) {
      const double r = (X.transpose() * Y.col(j)).norm();
      w[j] = 1.0 / std::max(cfg.delta, r);
    }
    const Matrix M = Y * w.asDiagonal() * Y.transpose();
    Matrix X_new = smallest_eigvecs(M, q);
    const double f_new = l12_objective(Y, X_new);
    const double delta_f = std::abs(f_new - f);

    TraceRecord rec;
    rec.k = k;
    rec.objective = f_new;
    if (metric) rec.metric = metric(X_new);
    rec.alpha = 1.0;
    rec.d_norm = (X_new - X).norm();
    rec.wall_seconds = seconds_since(start);
    out.trace.records.push_back(rec);

    X = std::move(X_new);
    f = f_new;
    if (delta_f <= cfg.abs_obj_tol) {
      out.status = "converged";
      break;
    }
  }
  out.X = StiefelPoint::make(std::move(X));
  return out;
}

}  // namespace manppa
