#pragma once

#include "manppa/manppa.hpp"
#include "manppa/types.hpp"

#include <vector>

namespace manppa {

// Deterministic initializer for the next column: the direction of smallest
// data covariance within the orthogonal complement of span(orth). With an
// empty `orth` this is the plain spectral initializer.
Vector complement_init(const Matrix& Y, const Matrix& orth);

struct SequentialResult {
  StiefelPoint X;
  Matrix X_raw;  // concatenated column solutions before the final QR polish
  std::vector<IterateTrace> column_traces;
  std::vector<std::string> column_status;
  std::string status;  // "converged" unless some column failed or hit max_iters
};

// Per-column metric factory: invoked once per column index, may return an
// empty hook.
using ColumnMetricHook = std::function<MetricHook(Index column)>;

// Greedy multi-column minimization of ‖YᵀX‖₁ over orthonormal X: columns are
// solved one at a time, each restricted to the orthogonal complement of the
// previously accepted columns and initialized with complement_init. A final
// QR pass (positive-diagonal convention) removes the accumulated drift.
SequentialResult sequential_manppa(const Matrix& Y, Index q,
                                   const ManppaConfig& cfg = {},
                                   const ColumnMetricHook& hooks = {});

}  // namespace manppa
