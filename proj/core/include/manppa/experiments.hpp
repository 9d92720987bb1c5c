#pragma once

#include "manppa/datagen.hpp"
#include "manppa/trace.hpp"
#include "manppa/types.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace manppa {

// Raised for malformed grid/curve/solver configuration (unknown solvers,
// unknown keys, bad values). The CLI maps this to a usage error.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// FNV-1a, used to derive stable content keys for idempotent result tables.
std::uint64_t fnv1a64(std::string_view text);
std::string hex64(std::uint64_t v);

// A fully resolved solver invocation. `config_json` is canonical (defaults
// filled in, keys sorted) so equal configurations serialize identically.
struct RunConfig {
  std::string solver;
  std::uint64_t seed = 1;
  Index q = 1;
  std::string config_json;
};

// Parses `user_json` (may be empty), validates keys against the solver's
// schema, fills defaults and canonicalizes. Throws ConfigError.
RunConfig resolve_run_config(const std::string& solver, const std::string& user_json,
                             std::uint64_t seed, Index q);

// Names of all solvers accepted by resolve_run_config / run_solver.
const std::vector<std::string>& solver_names();

struct RunResult {
  Matrix X;  // n×q (q = 1 for the single-vector solvers)
  double final_objective = 0.0;
  double final_metric = std::numeric_limits<double>::quiet_NaN();
  int iters = 0;
  double seconds = 0.0;
  std::string status;
  IterateTrace trace;
};

// Runs the configured solver on the instance with the model's recovery
// metric recorded into the trace (principal angle for the subspace model,
// dictionary angle for the dictionary model, subspace distance for the
// multi-column solvers).
RunResult run_solver(const Instance& inst, const RunConfig& cfg);

// One row of results.csv. Shape fields are kept as strings because the two
// models fill them differently (d vs gamma, p1 blank for the dictionary
// model, p2 vs p).
struct ResultRow {
  std::string model;
  Index n = 0;
  std::string d_or_gamma;
  std::string p1;
  std::string p2_or_p;
  std::string solver;  // solver label within the grid
  std::uint64_t seed = 0;
  double final_metric = std::numeric_limits<double>::quiet_NaN();
  int iters = 0;
  double seconds = 0.0;
  std::string status;
  std::string trace_path;
};

std::vector<ResultRow> read_result_rows(const std::filesystem::path& csv);
void append_result_rows(const std::filesystem::path& csv,
                        const std::vector<ResultRow>& rows);

// Content key identifying a grid cell: instance shape + solver label + seed
// + the solver's resolved configuration. Rows reloaded from disk reproduce
// the key of the cell that produced them.
std::string result_row_key(const ResultRow& row, Index q,
                           const std::string& config_json);

struct PolyFit {
  Vector coefficients;
  double residual_rms = 0.0;
};

// Least-squares fit y ≈ c0·x² + c1·x + c2 over (x, y) pairs (needs ≥ 3).
PolyFit fit_quadratic(const std::vector<std::array<double, 2>>& points);

// Least-squares fit ln y ≈ slope·ln x + intercept over positive (x, y)
// pairs (needs ≥ 2); coefficients = [slope, intercept], residual in log space.
PolyFit fit_loglog(const std::vector<std::array<double, 2>>& points);

struct GridOutcome {
  std::filesystem::path out_dir;
  int cells_total = 0;
  int cells_run = 0;
  int cells_skipped = 0;
};

// Executes a grid of (instance × solver × seed) cells described by a JSON
// document (see README for the schema). Cells already present in
// <out>/results.csv — matched by a content hash of instance parameters,
// solver label, resolved configuration and seed — are skipped, so re-running
// a completed grid is a no-op. Missing cells run on a small thread pool;
// each cell owns a generator stream derived from its seed, and rows are
// appended in deterministic grid order.
GridOutcome run_grid(const std::string& grid_json_text, int jobs_override = 0);

struct CurveOutcome {
  std::filesystem::path out_dir;
  std::filesystem::path fits_path;
  int points = 0;
  int misses = 0;
};

// Recovery-boundary scan for the subspace model: for every outlier count p2
// in the grid, finds the smallest inlier count p1 whose mean principal angle
// over the trials beats the threshold, then least-squares fits
// p2 ≈ a·p1² + b·p1 + c. Individual runs share the idempotent results.csv
// machinery of run_grid; the fit lands in <out>/fits.json.
CurveOutcome rsr_tolerance_curve(const std::string& spec_json_text,
                                 int jobs_override = 0);

// Sample-complexity scan for the dictionary model: for every n, finds the
// smallest p = 2n + offset whose mean dictionary angle beats the threshold,
// then fits ln p ≈ slope·ln n + intercept.
CurveOutcome odl_fit_curve(const std::string& spec_json_text,
                           int jobs_override = 0);

// Built-in curve specifications: desk-scale by default, paper-scale grids
// with full = true.
std::string rsr_curve_preset(bool full);
std::string odl_curve_preset(bool full);

}  // namespace manppa
