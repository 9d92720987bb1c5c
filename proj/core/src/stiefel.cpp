#include "manppa/stiefel.hpp"

#include "manppa/eigensolver.hpp"
#include "manppa/geometry.hpp"

#include <cmath>
#include <string>

namespace manppa {

Vector complement_init(const Matrix& Y, const Matrix& orth) {
  validate_data_matrix(Y, "complement_init");
  const Index n = Y.rows();
  const Index ell = orth.size() > 0 ? orth.cols() : 0;
  if (ell >= n) {
    throw DegenerateInput("complement_init: complement is empty");
  }
  if (ell > 0 && orth.rows() != n) {
    throw DegenerateInput("complement_init: basis row mismatch");
  }

  // Orthonormal basis K of span(orth)⊥ by Gram-Schmidt over the identity
  // columns in index order (projected twice for numerical orthogonality).
  Matrix K(n, n - ell);
  Index found = 0;
  for (Index i = 0; i < n && found < n - ell; ++i) {
    Vector v = Vector::Zero(n);
    v[i] = 1.0;
    for (int pass = 0; pass < 2; ++pass) {
      if (ell > 0) v -= orth * (orth.transpose() * v);
      if (found > 0) {
        v -= K.leftCols(found) * (K.leftCols(found).transpose() * v);
      }
    }
    const double norm = v.norm();
    if (norm > 1e-8) {
      K.col(found) = v / norm;
      ++found;
    }
  }
  if (found < n - ell) {
    throw DegenerateInput("complement_init: failed to complete the basis");
  }

  const Matrix reduced = K.transpose() * (Y * (Y.transpose() * K));
  const Matrix w = smallest_eigvecs(0.5 * (reduced + reduced.transpose()), 1);
  return project_sphere(K * w.col(0));
}

SequentialResult sequential_manppa(const Matrix& Y, Index q,
                                   const ManppaConfig& cfg,
                                   const ColumnMetricHook& hooks) {
  validate_data_matrix(Y, "sequential_manppa");
  const Index n = Y.rows();
  if (q < 1 || q > n) {
    throw DegenerateInput("sequential_manppa: q out of range");
  }

  SequentialResult out;
  out.status = "converged";
  Matrix X(n, q);

  for (Index col = 0; col < q; ++col) {
    const Matrix fixed = X.leftCols(col);
    const Vector x0 = complement_init(Y, fixed);
    MetricHook hook = hooks ? hooks(col) : MetricHook{};
    try {
      SolveResult res = manppa_solve_orth(Y, SpherePoint::make(x0), fixed, cfg, hook);
      // The first column runs unconstrained; restamp so every column trace
      // shares the per-column layout and solver name.
      res.trace.solver = "seq-manppa";
      res.trace.layout = TraceLayout::kPerColumn;
      for (TraceRecord& r : res.trace.records) r.column = static_cast<int>(col);
      X.col(col) = res.x;
      out.column_traces.push_back(std::move(res.trace));
      out.column_status.push_back(res.status);
      if (res.status != "converged" && out.status == "converged") {
        out.status = res.status;
      }
    } catch (const std::exception& e) {
      // Keep the feasible initializer so the remaining columns can proceed,
      // but flag the failure both per column and globally.
      X.col(col) = x0;
      IterateTrace failed;
      failed.solver = "seq-manppa";
      failed.layout = TraceLayout::kPerColumn;
      failed.t = cfg.t;
      failed.initial_objective = objective(Y, x0);
      out.column_traces.push_back(std::move(failed));
      out.column_status.push_back(std::string("failed: ") + e.what());
      out.status = "failed";
    }
  }

  // The columns are orthonormal up to per-column solver drift; one QR pass
  // (positive diagonal, so signs are preserved for near-orthonormal input)
  // restores machine-precision orthonormality.
  out.X_raw = X;
  QrFactors qr = qr_positive(X);
  out.X = StiefelPoint::make(std::move(qr.Q));
  return out;
}

}  // namespace manppa
