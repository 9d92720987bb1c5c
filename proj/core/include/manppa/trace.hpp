#pragma once

#include "manppa/types.hpp"

#include <filesystem>
#include <limits>
#include <string>
#include <vector>

namespace manppa {

// One record per accepted outer iteration (or per epoch for the stochastic
// solver). `metric` is an optional recovery measure (principal angle,
// dictionary angle or subspace distance) and is NaN when no hook is set.
struct TraceRecord {
  int k = 0;
  double objective = 0.0;
  double metric = std::numeric_limits<double>::quiet_NaN();
  double alpha = 1.0;
  double d_norm = 0.0;
  int alm_iters = 0;
  int ssn_iters = 0;
  double wall_seconds = 0.0;
  // Extra fields of the stochastic layout.
  int epoch = -1;
  double t_k = std::numeric_limits<double>::quiet_NaN();
  int step_case = -1;
  // Extra field of the per-column layout.
  int column = -1;
};

enum class TraceLayout { kBase, kStochastic, kPerColumn };

struct IterateTrace {
  std::string solver;
  TraceLayout layout = TraceLayout::kBase;
  double initial_objective = std::numeric_limits<double>::quiet_NaN();
  double initial_metric = std::numeric_limits<double>::quiet_NaN();
  double t = std::numeric_limits<double>::quiet_NaN();
  std::vector<TraceRecord> records;
};

// CSV columns: k, objective, metric, alpha, d_norm, alm_iters, ssn_iters,
// wall_seconds; the stochastic layout appends epoch, t_k, case and the
// per-column layout appends column. One header line, then one row per record.
void write_trace_csv(const std::filesystem::path& path, const IterateTrace& trace);

// Same content as a JSON document (header metadata plus a records array).
std::string trace_to_json(const IterateTrace& trace);

}  // namespace manppa
