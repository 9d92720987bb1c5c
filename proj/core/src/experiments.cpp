#include "manppa/experiments.hpp"

#include "manppa/baselines.hpp"
#include "manppa/csv.hpp"
#include "manppa/geometry.hpp"
#include "manppa/manppa.hpp"
#include "manppa/stiefel.hpp"
#include "manppa/stmanppa.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <thread>

namespace manppa {
namespace {

using nlohmann::json;
using Clock = std::chrono::steady_clock;

json parse_json(const std::string& text, const std::string& who) {
  try {
    return json::parse(text.empty() ? "{}" : text);
  } catch (const json::exception& e) {
    throw ConfigError(who + ": invalid JSON: " + e.what());
  }
}

// Overlays `user` onto `defaults`, rejecting keys absent from the schema and
// scalar/object mismatches. Returns the merged document.
json merge_validate(const json& defaults, const json& user, const std::string& path) {
  if (!user.is_object()) {
    throw ConfigError(path + ": expected a JSON object");
  }
  json out = defaults;
  for (const auto& [key, value] : user.items()) {
    if (!defaults.contains(key)) {
      throw ConfigError(path + ": unknown key '" + key + "'");
    }
    if (defaults.at(key).is_object()) {
      out[key] = merge_validate(defaults.at(key), value, path + "." + key);
    } else if (defaults.at(key).is_array()) {
      if (!value.is_array()) {
        throw ConfigError(path + "." + key + ": expected an array");
      }
      out[key] = value;
    } else if (value.is_object() || value.is_array()) {
      throw ConfigError(path + "." + key + ": expected a scalar");
    } else {
      out[key] = value;
    }
  }
  return out;
}

const json& solver_defaults(const std::string& solver) {
  static const std::map<std::string, json> defaults = {
      {"manppa", json::parse(R"({
        "t": 0.1, "beta": 0.5, "max_iters": 100, "rel_obj_tol": 1e-9,
        "d_norm_tol": 1e-14, "max_backtracks": 60,
        "eps0": 1.0, "eps_decay": 0.1, "eps_floor": 1e-12,
        "alm": {"sigma0_factor": 3000.0, "sigma_cap": 1e6, "max_alm_iters": 30,
                "max_ssn_iters": 20, "armijo_mu": 0.1, "backtrack": 0.5,
                "shrink": 0.99}})")},
      {"stmanppa", json::parse(R"({
        "t0": 0.6, "beta": 0.8, "epochs": 500, "rel_obj_tol": 1e-12,
        "output": "last"})")},
      {"psgm", json::parse(R"({
        "schedule": {"kind": "geometric", "eta0": 0.1, "ratio": 0.9,
                     "phase": 50, "k0": 0},
        "max_iters": 500, "rel_obj_tol": 0.0})")},
      {"rsgm", json::parse(R"({
        "schedule": {"kind": "geometric", "eta0": 0.1, "ratio": 0.9,
                     "phase": 50, "k0": 0},
        "max_iters": 500, "rel_obj_tol": 0.0})")},
      {"psgm-mbls", json::parse(R"({
        "initial_step": 1.0, "max_iters": 500, "rel_obj_tol": 1e-9,
        "max_halvings": 60})")},
      {"irls", json::parse(R"({
        "delta": 1e-8, "max_iters": 100, "abs_obj_tol": 1e-11})")}};
  if (solver == "seq-manppa") return defaults.at("manppa");
  const auto it = defaults.find(solver);
  if (it == defaults.end()) {
    throw ConfigError("unknown solver '" + solver + "'");
  }
  return it->second;
}

ManppaConfig manppa_config_from(const json& j) {
  ManppaConfig cfg;
  cfg.t = j.at("t").get<double>();
  cfg.beta = j.at("beta").get<double>();
  cfg.max_iters = j.at("max_iters").get<int>();
  cfg.rel_obj_tol = j.at("rel_obj_tol").get<double>();
  cfg.d_norm_tol = j.at("d_norm_tol").get<double>();
  cfg.max_backtracks = j.at("max_backtracks").get<int>();
  cfg.eps0 = j.at("eps0").get<double>();
  cfg.eps_decay = j.at("eps_decay").get<double>();
  cfg.eps_floor = j.at("eps_floor").get<double>();
  const json& alm = j.at("alm");
  cfg.alm.sigma0_factor = alm.at("sigma0_factor").get<double>();
  cfg.alm.sigma_cap = alm.at("sigma_cap").get<double>();
  cfg.alm.max_alm_iters = alm.at("max_alm_iters").get<int>();
  cfg.alm.max_ssn_iters = alm.at("max_ssn_iters").get<int>();
  cfg.alm.armijo_mu = alm.at("armijo_mu").get<double>();
  cfg.alm.backtrack = alm.at("backtrack").get<double>();
  cfg.alm.shrink = alm.at("shrink").get<double>();
  return cfg;
}

StmanppaConfig stmanppa_config_from(const json& j) {
  StmanppaConfig cfg;
  cfg.t0 = j.at("t0").get<double>();
  cfg.beta = j.at("beta").get<double>();
  cfg.epochs = j.at("epochs").get<int>();
  cfg.rel_obj_tol = j.at("rel_obj_tol").get<double>();
  const std::string output = j.at("output").get<std::string>();
  if (output == "last") {
    cfg.output = StmanppaConfig::Output::kLast;
  } else if (output == "weighted_random") {
    cfg.output = StmanppaConfig::Output::kWeightedRandom;
  } else {
    throw ConfigError("stmanppa.output must be 'last' or 'weighted_random'");
  }
  return cfg;
}

SubgradConfig subgrad_config_from(const json& j) {
  SubgradConfig cfg;
  const json& s = j.at("schedule");
  const std::string kind = s.at("kind").get<std::string>();
  if (kind == "constant") {
    cfg.schedule.kind = ScheduleConfig::Kind::kConstant;
  } else if (kind == "geometric") {
    cfg.schedule.kind = ScheduleConfig::Kind::kGeometric;
  } else if (kind == "piecewise") {
    cfg.schedule.kind = ScheduleConfig::Kind::kPiecewise;
  } else {
    throw ConfigError("schedule.kind must be constant|geometric|piecewise");
  }
  cfg.schedule.eta0 = s.at("eta0").get<double>();
  cfg.schedule.ratio = s.at("ratio").get<double>();
  cfg.schedule.phase = s.at("phase").get<int>();
  cfg.schedule.k0 = s.at("k0").get<int>();
  cfg.max_iters = j.at("max_iters").get<int>();
  cfg.rel_obj_tol = j.at("rel_obj_tol").get<double>();
  return cfg;
}

MblsConfig mbls_config_from(const json& j) {
  MblsConfig cfg;
  cfg.initial_step = j.at("initial_step").get<double>();
  cfg.max_iters = j.at("max_iters").get<int>();
  cfg.rel_obj_tol = j.at("rel_obj_tol").get<double>();
  cfg.max_halvings = j.at("max_halvings").get<int>();
  return cfg;
}

IrlsConfig irls_config_from(const json& j) {
  IrlsConfig cfg;
  cfg.delta = j.at("delta").get<double>();
  cfg.max_iters = j.at("max_iters").get<int>();
  cfg.abs_obj_tol = j.at("abs_obj_tol").get<double>();
  return cfg;
}

bool is_vector_solver(const std::string& solver) {
  return solver == "manppa" || solver == "stmanppa" || solver == "psgm" ||
         solver == "rsgm" || solver == "psgm-mbls";
}

}  // namespace

std::uint64_t fnv1a64(std::string_view text) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (const char c : text) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001B3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<size_t>(i)] = digits[v & 0xF];
    v >>= 4;
  }
  return out;
}

const std::vector<std::string>& solver_names() {
  static const std::vector<std::string> names = {
      "manppa", "stmanppa", "psgm", "rsgm", "psgm-mbls", "irls", "seq-manppa"};
  return names;
}

RunConfig resolve_run_config(const std::string& solver, const std::string& user_json,
                             std::uint64_t seed, Index q) {
  if (std::find(solver_names().begin(), solver_names().end(), solver) ==
      solver_names().end()) {
    throw ConfigError("unknown solver '" + solver + "'");
  }
  if (q < 1) {
    throw ConfigError("q must be at least 1");
  }
  if (is_vector_solver(solver) && q != 1) {
    throw ConfigError("solver '" + solver + "' produces a single vector; q must be 1");
  }
  const json merged = merge_validate(solver_defaults(solver),
                                     parse_json(user_json, "config"), solver);
  RunConfig cfg;
  cfg.solver = solver;
  cfg.seed = seed;
  cfg.q = q;
  cfg.config_json = merged.dump();
  return cfg;
}

RunResult run_solver(const Instance& inst, const RunConfig& cfg) {
  const Matrix& Y = inst.Y;
  const json config = parse_json(cfg.config_json, "run_solver");

  MetricHook vector_hook;
  MatrixMetricHook matrix_hook;
  if (inst.meta.model == "rsr") {
    const SubspaceBasis S = SubspaceBasis::make(inst.truth);
    vector_hook = [S](const Vector& x) { return principal_angle(x, S); };
    matrix_hook = [S](const Matrix& X) {
      return subspace_recovery_error(StiefelPoint{X}, S);
    };
  } else if (inst.meta.model == "odl") {
    const StiefelPoint dict = StiefelPoint::make(inst.truth);
    vector_hook = [dict](const Vector& x) {
      return angle_to_dictionary(x, dict).first;
    };
    matrix_hook = [dict](const Matrix& X) {
      double worst = 0.0;
      for (Index j = 0; j < X.cols(); ++j) {
        worst = std::max(worst, angle_to_dictionary(X.col(j), dict).first);
      }
      return worst;
    };
  } else {
    throw ConfigError("run_solver: unknown model '" + inst.meta.model + "'");
  }

  RunResult out;
  const auto start = Clock::now();
  if (cfg.solver == "manppa") {
    const SolveResult res = manppa_solve(Y, SpherePoint::make(spectral_init(Y)),
                                         manppa_config_from(config), vector_hook);
    out.X = res.x;
    out.trace = res.trace;
    out.status = res.status;
  } else if (cfg.solver == "stmanppa") {
    const SolveResult res =
        stmanppa_solve(Y, SpherePoint::make(spectral_init(Y)),
                       stmanppa_config_from(config), cfg.seed, vector_hook);
    out.X = res.x;
    out.trace = res.trace;
    out.status = res.status;
  } else if (cfg.solver == "psgm" || cfg.solver == "rsgm") {
    const SubgradConfig sub = subgrad_config_from(config);
    const SpherePoint x0 = SpherePoint::make(spectral_init(Y));
    const SolveResult res = cfg.solver == "psgm"
                                ? psgm_solve(Y, x0, sub, vector_hook)
                                : rsgm_solve(Y, x0, sub, vector_hook);
    out.X = res.x;
    out.trace = res.trace;
    out.status = res.status;
  } else if (cfg.solver == "psgm-mbls") {
    const SolveResult res = psgm_mbls_solve(Y, SpherePoint::make(spectral_init(Y)),
                                            mbls_config_from(config), vector_hook);
    out.X = res.x;
    out.trace = res.trace;
    out.status = res.status;
  } else if (cfg.solver == "irls") {
    const IrlsResult res = irls_solve(Y, cfg.q, irls_config_from(config), matrix_hook);
    out.X = res.X.m;
    out.trace = res.trace;
    out.status = res.status;
  } else if (cfg.solver == "seq-manppa") {
    const ManppaConfig mc = manppa_config_from(config);
    const SequentialResult res = sequential_manppa(
        Y, cfg.q, mc, [&vector_hook](Index) { return vector_hook; });
    out.X = res.X.m;
    out.status = res.status;
    out.trace.solver = "seq-manppa";
    out.trace.layout = TraceLayout::kPerColumn;
    out.trace.t = mc.t;
    if (!res.column_traces.empty()) {
      out.trace.initial_objective = res.column_traces.front().initial_objective;
      out.trace.initial_metric = res.column_traces.front().initial_metric;
    }
    for (const IterateTrace& tr : res.column_traces) {
      out.trace.records.insert(out.trace.records.end(), tr.records.begin(),
                               tr.records.end());
    }
  } else {
    throw ConfigError("run_solver: unknown solver '" + cfg.solver + "'");
  }
  out.seconds = std::chrono::duration<double>(Clock::now() - start).count();

  if (cfg.solver == "irls") {
    out.final_objective = l12_objective(Y, out.X);
  } else {
    out.final_objective =
        out.X.cols() == 1 ? objective(Y, Vector(out.X.col(0))) : objective(Y, out.X);
  }
  out.final_metric =
      out.X.cols() == 1 ? vector_hook(out.X.col(0)) : matrix_hook(out.X);
  out.iters = static_cast<int>(out.trace.records.size());
  return out;
}

namespace {

constexpr const char* kResultsHeader =
    "model,n,d_or_gamma,p1,p2_or_p,solver,seed,final_metric,iters,seconds,status,"
    "trace_path";

std::string sanitize_field(std::string s) {
  for (char& c : s) {
    if (c == ',' || c == '\n' || c == '\r') c = ';';
  }
  return s;
}

std::string row_to_csv(const ResultRow& r) {
  std::string line;
  line += r.model;
  line += ',';
  line += std::to_string(r.n);
  line += ',';
  line += r.d_or_gamma;
  line += ',';
  line += r.p1;
  line += ',';
  line += r.p2_or_p;
  line += ',';
  line += r.solver;
  line += ',';
  line += std::to_string(r.seed);
  line += ',';
  line += format_double(r.final_metric);
  line += ',';
  line += std::to_string(r.iters);
  line += ',';
  line += format_double(r.seconds);
  line += ',';
  line += sanitize_field(r.status);
  line += ',';
  line += r.trace_path;
  return line;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (const char c : line) {
    if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  fields.push_back(cur);
  return fields;
}

struct SolverEntry {
  std::string name;
  std::string label;
  Index q = 1;
  std::string config_json;  // canonical
};

SolverEntry parse_solver_entry(const json& j) {
  if (!j.is_object() || !j.contains("name")) {
    throw ConfigError("solvers[]: each entry needs a 'name'");
  }
  for (const auto& [key, value] : j.items()) {
    (void)value;
    if (key != "name" && key != "label" && key != "q" && key != "config") {
      throw ConfigError("solvers[]: unknown key '" + key + "'");
    }
  }
  SolverEntry entry;
  entry.name = j.at("name").get<std::string>();
  entry.label = j.value("label", entry.name);
  entry.q = j.value("q", Index{1});
  for (const char c : entry.label) {
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_' && c != '-') {
      throw ConfigError("solvers[]: label must be [A-Za-z0-9_-]+");
    }
  }
  const std::string user_config = j.contains("config") ? j.at("config").dump() : "";
  entry.config_json = resolve_run_config(entry.name, user_config, 1, entry.q).config_json;
  return entry;
}

InstanceMeta parse_instance_meta(const std::string& model, const json& j) {
  InstanceMeta meta;
  meta.model = model;
  if (model == "rsr") {
    for (const auto& [key, value] : j.items()) {
      (void)value;
      if (key != "n" && key != "d" && key != "p1" && key != "p2") {
        throw ConfigError("instances[]: unknown key '" + key + "' for model rsr");
      }
    }
    meta.n = j.at("n").get<Index>();
    meta.d = j.at("d").get<Index>();
    meta.p1 = j.at("p1").get<Index>();
    meta.p2 = j.at("p2").get<Index>();
  } else if (model == "odl") {
    for (const auto& [key, value] : j.items()) {
      (void)value;
      if (key != "n" && key != "p" && key != "gamma") {
        throw ConfigError("instances[]: unknown key '" + key + "' for model odl");
      }
    }
    meta.n = j.at("n").get<Index>();
    meta.p = j.at("p").get<Index>();
    meta.gamma = j.at("gamma").get<double>();
  } else {
    throw ConfigError("model must be 'rsr' or 'odl'");
  }
  return meta;
}

void fill_row_shape(ResultRow& row, const InstanceMeta& meta) {
  row.model = meta.model;
  row.n = meta.n;
  if (meta.model == "rsr") {
    row.d_or_gamma = std::to_string(meta.d);
    row.p1 = std::to_string(meta.p1);
    row.p2_or_p = std::to_string(meta.p2);
  } else {
    row.d_or_gamma = format_double(meta.gamma);
    row.p1 = "";
    row.p2_or_p = std::to_string(meta.p);
  }
}

std::string trace_file_name(const ResultRow& row) {
  std::string name = row.model;
  name += "_n" + std::to_string(row.n);
  if (row.model == "rsr") {
    name += "_d" + row.d_or_gamma + "_p1" + row.p1 + "_p2" + row.p2_or_p;
  } else {
    std::string g = row.d_or_gamma;
    for (char& c : g) {
      if (c == '.') c = 'p';
    }
    name += "_g" + g + "_p" + row.p2_or_p;
  }
  name += "_" + row.solver + "_s" + std::to_string(row.seed) + ".csv";
  return name;
}

struct Cell {
  InstanceMeta meta;  // seed filled in
  SolverEntry solver;
};

// Runs every cell not present in results.csv on a small pool and appends the
// produced rows in deterministic cell order. Returns (run, skipped).
std::pair<int, int> run_cells(const std::filesystem::path& out_dir,
                              const std::vector<Cell>& cells, int jobs,
                              std::map<std::string, ResultRow>* row_index) {
  const std::filesystem::path results_csv = out_dir / "results.csv";
  const std::filesystem::path trace_dir = out_dir / "traces";
  std::filesystem::create_directories(trace_dir);

  std::vector<int> missing;
  for (int i = 0; i < static_cast<int>(cells.size()); ++i) {
    ResultRow probe;
    fill_row_shape(probe, cells[static_cast<size_t>(i)].meta);
    probe.solver = cells[static_cast<size_t>(i)].solver.label;
    probe.seed = cells[static_cast<size_t>(i)].meta.seed;
    const std::string key = result_row_key(probe, cells[static_cast<size_t>(i)].solver.q,
                                     cells[static_cast<size_t>(i)].solver.config_json);
    if (row_index->find(key) == row_index->end()) missing.push_back(i);
  }
  if (missing.empty()) {
    return {0, static_cast<int>(cells.size())};
  }

  std::vector<ResultRow> produced(missing.size());
  std::atomic<size_t> next{0};
  const int workers = std::max(1, std::min<int>(jobs, static_cast<int>(missing.size())));
  auto work = [&]() {
    for (;;) {
      const size_t slot = next.fetch_add(1);
      if (slot >= missing.size()) return;
      const Cell& cell = cells[static_cast<size_t>(missing[slot])];
      ResultRow row;
      fill_row_shape(row, cell.meta);
      row.solver = cell.solver.label;
      row.seed = cell.meta.seed;
      try {
        Instance inst = generate_instance(cell.meta);
        RunConfig rc;
        rc.solver = cell.solver.name;
        rc.seed = cell.meta.seed;
        rc.q = cell.solver.q;
        rc.config_json = cell.solver.config_json;
        const RunResult rr = run_solver(inst, rc);
        row.final_metric = rr.final_metric;
        row.iters = rr.iters;
        row.seconds = rr.seconds;
        row.status = rr.status;
        row.trace_path = "traces/" + trace_file_name(row);
        write_trace_csv(out_dir / row.trace_path, rr.trace);
      } catch (const std::exception& e) {
        row.status = std::string("failed: ") + e.what();
      }
      produced[slot] = std::move(row);
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(static_cast<size_t>(workers));
  for (int w = 0; w < workers; ++w) pool.emplace_back(work);
  for (std::thread& th : pool) th.join();

  append_result_rows(results_csv, produced);
  for (size_t i = 0; i < missing.size(); ++i) {
    const Cell& cell = cells[static_cast<size_t>(missing[i])];
    (*row_index)[result_row_key(produced[i], cell.solver.q, cell.solver.config_json)] =
        produced[i];
  }
  return {static_cast<int>(missing.size()),
          static_cast<int>(cells.size() - missing.size())};
}

std::map<std::string, ResultRow> load_row_index(
    const std::filesystem::path& results_csv,
    const std::vector<SolverEntry>& solvers) {
  std::map<std::string, ResultRow> index;
  if (!std::filesystem::exists(results_csv)) return index;
  for (const ResultRow& row : read_result_rows(results_csv)) {
    for (const SolverEntry& s : solvers) {
      if (s.label == row.solver) {
        index[result_row_key(row, s.q, s.config_json)] = row;
        break;
      }
    }
  }
  return index;
}

int effective_jobs(int override_jobs, int config_jobs) {
  if (override_jobs > 0) return override_jobs;
  if (config_jobs > 0) return config_jobs;
  const unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 2 : static_cast<int>(hc);
}

}  // namespace

std::vector<ResultRow> read_result_rows(const std::filesystem::path& csv) {
  std::ifstream in(csv);
  if (!in) {
    throw IoError("read_result_rows: cannot open " + csv.string());
  }
  std::string line;
  if (!std::getline(in, line) || line != kResultsHeader) {
    throw IoError("read_result_rows: unexpected header in " + csv.string());
  }
  std::vector<ResultRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const std::vector<std::string> f = split_csv_line(line);
    if (f.size() != 12) {
      throw IoError("read_result_rows: malformed row in " + csv.string());
    }
    ResultRow r;
    r.model = f[0];
    r.n = std::stoll(f[1]);
    r.d_or_gamma = f[2];
    r.p1 = f[3];
    r.p2_or_p = f[4];
    r.solver = f[5];
    r.seed = std::stoull(f[6]);
    r.final_metric = std::stod(f[7]);
    r.iters = std::stoi(f[8]);
    r.seconds = std::stod(f[9]);
    r.status = f[10];
    r.trace_path = f[11];
    rows.push_back(std::move(r));
  }
  return rows;
}

void append_result_rows(const std::filesystem::path& csv,
                        const std::vector<ResultRow>& rows) {
  const bool fresh = !std::filesystem::exists(csv);
  std::ofstream out(csv, std::ios::app);
  if (!out) {
    throw IoError("append_result_rows: cannot open " + csv.string());
  }
  if (fresh) out << kResultsHeader << '\n';
  for (const ResultRow& r : rows) {
    out << row_to_csv(r) << '\n';
  }
  if (!out) {
    throw IoError("append_result_rows: write failed for " + csv.string());
  }
}

std::string result_row_key(const ResultRow& row, Index q,
                           const std::string& config_json) {
  std::string text = row.model;
  text += '|';
  text += std::to_string(row.n);
  text += '|';
  text += row.d_or_gamma;
  text += '|';
  text += row.p1;
  text += '|';
  text += row.p2_or_p;
  text += '|';
  text += row.solver;
  text += '|';
  text += std::to_string(row.seed);
  text += '|';
  text += std::to_string(q);
  text += '|';
  text += config_json;
  return hex64(fnv1a64(text));
}

PolyFit fit_quadratic(const std::vector<std::array<double, 2>>& points) {
  if (points.size() < 3) {
    throw ConfigError("fit_quadratic: need at least 3 points");
  }
  Matrix A(static_cast<Index>(points.size()), 3);
  Vector b(static_cast<Index>(points.size()));
  for (Index i = 0; i < A.rows(); ++i) {
    const auto& [x, y] = points[static_cast<size_t>(i)];
    A(i, 0) = x * x;
    A(i, 1) = x;
    A(i, 2) = 1.0;
    b[i] = y;
  }
  PolyFit fit;
  fit.coefficients = A.colPivHouseholderQr().solve(b);
  fit.residual_rms = std::sqrt((A * fit.coefficients - b).squaredNorm() /
                               static_cast<double>(points.size()));
  return fit;
}

PolyFit fit_loglog(const std::vector<std::array<double, 2>>& points) {
  if (points.size() < 2) {
    throw ConfigError("fit_loglog: need at least 2 points");
  }
  Matrix A(static_cast<Index>(points.size()), 2);
  Vector b(static_cast<Index>(points.size()));
  for (Index i = 0; i < A.rows(); ++i) {
    const auto& [x, y] = points[static_cast<size_t>(i)];
    if (x <= 0.0 || y <= 0.0) {
      throw ConfigError("fit_loglog: points must be positive");
    }
    A(i, 0) = std::log(x);
    A(i, 1) = 1.0;
    b[i] = std::log(y);
  }
  PolyFit fit;
  fit.coefficients = A.colPivHouseholderQr().solve(b);
  fit.residual_rms = std::sqrt((A * fit.coefficients - b).squaredNorm() /
                               static_cast<double>(points.size()));
  return fit;
}

GridOutcome run_grid(const std::string& grid_json_text, int jobs_override) {
  const json grid = parse_json(grid_json_text, "grid");
  for (const auto& [key, value] : grid.items()) {
    (void)value;
    if (key != "model" && key != "out" && key != "instances" && key != "solvers" &&
        key != "seeds" && key != "jobs") {
      throw ConfigError("grid: unknown key '" + key + "'");
    }
  }
  if (!grid.contains("model") || !grid.contains("out")) {
    throw ConfigError("grid: 'model' and 'out' are required");
  }
  const std::string model = grid.at("model").get<std::string>();
  const std::filesystem::path out_dir = grid.at("out").get<std::string>();

  std::vector<SolverEntry> solvers;
  std::set<std::string> labels;
  for (const json& j : grid.value("solvers", json::array())) {
    SolverEntry entry = parse_solver_entry(j);
    if (!labels.insert(entry.label).second) {
      throw ConfigError("grid: duplicate solver label '" + entry.label + "'");
    }
    solvers.push_back(std::move(entry));
  }

  std::vector<std::uint64_t> seeds;
  for (const json& s : grid.value("seeds", json::array())) {
    seeds.push_back(s.get<std::uint64_t>());
  }

  std::vector<Cell> cells;
  for (const json& ij : grid.value("instances", json::array())) {
    const InstanceMeta base = parse_instance_meta(model, ij);
    for (const SolverEntry& solver : solvers) {
      for (const std::uint64_t seed : seeds) {
        Cell cell;
        cell.meta = base;
        cell.meta.seed = seed;
        cell.solver = solver;
        cells.push_back(std::move(cell));
      }
    }
  }

  std::filesystem::create_directories(out_dir);
  // An empty grid still yields a results table (header only) for uniformity.
  if (!std::filesystem::exists(out_dir / "results.csv")) {
    append_result_rows(out_dir / "results.csv", {});
  }
  std::map<std::string, ResultRow> row_index =
      load_row_index(out_dir / "results.csv", solvers);

  const int jobs = effective_jobs(jobs_override, grid.value("jobs", 0));
  const auto [run, skipped] = run_cells(out_dir, cells, jobs, &row_index);

  json run_doc;
  run_doc["command"] = "experiment";
  run_doc["grid"] = grid;
  json resolved = json::object();
  for (const SolverEntry& s : solvers) {
    resolved[s.label] = parse_json(s.config_json, "resolved");
  }
  run_doc["resolved_solvers"] = std::move(resolved);
  run_doc["generator"] = kGeneratorName;
  write_text_file(out_dir / "run.json", run_doc.dump(2) + "\n");

  GridOutcome outcome;
  outcome.out_dir = out_dir;
  outcome.cells_total = static_cast<int>(cells.size());
  outcome.cells_run = run;
  outcome.cells_skipped = skipped;
  return outcome;
}

namespace {

// Shared scan driver for both curve families. For each outer value, runs
// trial cells at successive inner values until the mean metric beats the
// threshold, reusing rows already on disk.
struct ScanPoint {
  double outer = 0.0;
  double inner = 0.0;
  bool found = false;
};

}  // namespace

std::string rsr_curve_preset(bool full) {
  if (full) {
    return R"({
      "out": "rsr_curve_full",
      "n": 30, "d": 29,
      "p2_grid": [40, 80, 120, 160, 200, 240, 280, 320, 360, 400, 440, 480, 520, 560, 600],
      "p1_min": 60, "p1_max": 260, "p1_step": 10,
      "trials": 10, "angle_threshold": 0.1,
      "solver": "manppa", "config": {}, "jobs": 0, "seeds_base": 1
    })";
  }
  return R"({
    "out": "rsr_curve",
    "n": 30, "d": 29,
    "p2_grid": [40, 120, 280],
    "p1_min": 60, "p1_max": 260, "p1_step": 20,
    "trials": 3, "angle_threshold": 0.1,
    "solver": "manppa", "config": {}, "jobs": 0, "seeds_base": 1
  })";
}

std::string odl_curve_preset(bool full) {
  if (full) {
    return R"({
      "out": "odl_curve_full",
      "n_grid": [5, 10, 15, 20, 25, 30, 35, 40, 45, 50],
      "gamma": 0.3,
      "offsets": [10, 25, 50, 100, 200, 400, 800],
      "trials": 10, "angle_threshold": 0.1,
      "solver": "manppa", "config": {}, "jobs": 0, "seeds_base": 1
    })";
  }
  return R"({
    "out": "odl_curve",
    "n_grid": [6, 8, 10],
    "gamma": 0.3,
    "offsets": [10, 20, 40, 80, 160, 320],
    "trials": 3, "angle_threshold": 0.1,
    "solver": "manppa", "config": {}, "jobs": 0, "seeds_base": 1
  })";
}

CurveOutcome rsr_tolerance_curve(const std::string& spec_json_text, int jobs_override) {
  const json defaults = parse_json(rsr_curve_preset(false), "rsr curve preset");
  const json spec =
      merge_validate(defaults, parse_json(spec_json_text, "curve spec"), "curve");

  const std::filesystem::path out_dir = spec.at("out").get<std::string>();
  const Index n = spec.at("n").get<Index>();
  const Index d = spec.at("d").get<Index>();
  const int trials = spec.at("trials").get<int>();
  const double threshold = spec.at("angle_threshold").get<double>();
  const std::uint64_t seeds_base = spec.at("seeds_base").get<std::uint64_t>();

  SolverEntry solver;
  solver.name = spec.at("solver").get<std::string>();
  solver.label = solver.name;
  solver.q = 1;
  solver.config_json =
      resolve_run_config(solver.name, spec.at("config").dump(), 1, 1).config_json;

  std::filesystem::create_directories(out_dir);
  json run_doc;
  run_doc["command"] = "curve";
  run_doc["family"] = "rsr";
  run_doc["spec"] = spec;
  run_doc["resolved_solver"] = parse_json(solver.config_json, "resolved");
  run_doc["generator"] = kGeneratorName;
  write_text_file(out_dir / "run.json", run_doc.dump(2) + "\n");

  std::map<std::string, ResultRow> row_index =
      load_row_index(out_dir / "results.csv", {solver});
  const int jobs = effective_jobs(jobs_override, spec.value("jobs", 0));

  std::vector<ScanPoint> points;
  for (const json& p2j : spec.at("p2_grid")) {
    const Index p2 = p2j.get<Index>();
    ScanPoint point;
    point.outer = static_cast<double>(p2);
    for (Index p1 = spec.at("p1_min").get<Index>();
         p1 <= spec.at("p1_max").get<Index>();
         p1 += spec.at("p1_step").get<Index>()) {
      std::vector<Cell> batch;
      for (int trial = 0; trial < trials; ++trial) {
        Cell cell;
        cell.meta.model = "rsr";
        cell.meta.n = n;
        cell.meta.d = d;
        cell.meta.p1 = p1;
        cell.meta.p2 = p2;
        cell.meta.seed = seeds_base + static_cast<std::uint64_t>(trial);
        cell.solver = solver;
        batch.push_back(std::move(cell));
      }
      run_cells(out_dir, batch, jobs, &row_index);
      double mean = 0.0;
      for (const Cell& cell : batch) {
        ResultRow probe;
        fill_row_shape(probe, cell.meta);
        probe.solver = solver.label;
        probe.seed = cell.meta.seed;
        mean += row_index.at(result_row_key(probe, solver.q, solver.config_json)).final_metric;
      }
      mean /= trials;
      if (mean < threshold) {
        point.inner = static_cast<double>(p1);
        point.found = true;
        break;
      }
    }
    points.push_back(point);
  }

  json fit;
  fit["kind"] = "rsr_quadratic";
  fit["threshold"] = threshold;
  fit["trials"] = trials;
  json jpoints = json::array();
  json jmisses = json::array();
  std::vector<ScanPoint> hits;
  for (const ScanPoint& pt : points) {
    if (pt.found) {
      jpoints.push_back({pt.inner, pt.outer});  // [p1, p2]
      hits.push_back(pt);
    } else {
      jmisses.push_back(pt.outer);
    }
  }
  fit["points"] = jpoints;
  fit["misses"] = jmisses;
  if (hits.size() >= 3) {
    std::vector<std::array<double, 2>> pairs;
    double p1_min = hits.front().inner, p1_max = hits.front().inner;
    double p2_min = hits.front().outer, p2_max = hits.front().outer;
    for (const ScanPoint& pt : hits) {
      pairs.push_back({pt.inner, pt.outer});
      p1_min = std::min(p1_min, pt.inner);
      p1_max = std::max(p1_max, pt.inner);
      p2_min = std::min(p2_min, pt.outer);
      p2_max = std::max(p2_max, pt.outer);
    }
    const PolyFit poly = fit_quadratic(pairs);
    fit["coefficients"] = {poly.coefficients[0], poly.coefficients[1],
                           poly.coefficients[2]};
    fit["residual_rms"] = poly.residual_rms;
    fit["p1_range"] = {p1_min, p1_max};
    fit["p2_range"] = {p2_min, p2_max};
  } else {
    fit["insufficient_points"] = true;
  }
  write_text_file(out_dir / "fits.json", fit.dump(2) + "\n");

  CurveOutcome outcome;
  outcome.out_dir = out_dir;
  outcome.fits_path = out_dir / "fits.json";
  outcome.points = static_cast<int>(hits.size());
  outcome.misses = static_cast<int>(points.size() - hits.size());
  return outcome;
}

CurveOutcome odl_fit_curve(const std::string& spec_json_text, int jobs_override) {
  const json defaults = parse_json(odl_curve_preset(false), "odl curve preset");
  const json spec =
      merge_validate(defaults, parse_json(spec_json_text, "curve spec"), "curve");

  const std::filesystem::path out_dir = spec.at("out").get<std::string>();
  const double gamma = spec.at("gamma").get<double>();
  const int trials = spec.at("trials").get<int>();
  const double threshold = spec.at("angle_threshold").get<double>();
  const std::uint64_t seeds_base = spec.at("seeds_base").get<std::uint64_t>();

  SolverEntry solver;
  solver.name = spec.at("solver").get<std::string>();
  solver.label = solver.name;
  solver.q = 1;
  solver.config_json =
      resolve_run_config(solver.name, spec.at("config").dump(), 1, 1).config_json;

  std::filesystem::create_directories(out_dir);
  json run_doc;
  run_doc["command"] = "curve";
  run_doc["family"] = "odl";
  run_doc["spec"] = spec;
  run_doc["resolved_solver"] = parse_json(solver.config_json, "resolved");
  run_doc["generator"] = kGeneratorName;
  write_text_file(out_dir / "run.json", run_doc.dump(2) + "\n");

  std::map<std::string, ResultRow> row_index =
      load_row_index(out_dir / "results.csv", {solver});
  const int jobs = effective_jobs(jobs_override, spec.value("jobs", 0));

  std::vector<ScanPoint> points;
  for (const json& nj : spec.at("n_grid")) {
    const Index n = nj.get<Index>();
    ScanPoint point;
    point.outer = static_cast<double>(n);
    for (const json& oj : spec.at("offsets")) {
      const Index p = 2 * n + oj.get<Index>();
      std::vector<Cell> batch;
      for (int trial = 0; trial < trials; ++trial) {
        Cell cell;
        cell.meta.model = "odl";
        cell.meta.n = n;
        cell.meta.p = p;
        cell.meta.gamma = gamma;
        cell.meta.seed = seeds_base + static_cast<std::uint64_t>(trial);
        cell.solver = solver;
        batch.push_back(std::move(cell));
      }
      run_cells(out_dir, batch, jobs, &row_index);
      double mean = 0.0;
      for (const Cell& cell : batch) {
        ResultRow probe;
        fill_row_shape(probe, cell.meta);
        probe.solver = solver.label;
        probe.seed = cell.meta.seed;
        mean += row_index.at(result_row_key(probe, solver.q, solver.config_json)).final_metric;
      }
      mean /= trials;
      if (mean < threshold) {
        point.inner = static_cast<double>(p);
        point.found = true;
        break;
      }
    }
    points.push_back(point);
  }

  json fit;
  fit["kind"] = "odl_loglog";
  fit["threshold"] = threshold;
  fit["trials"] = trials;
  fit["gamma"] = gamma;
  json jpoints = json::array();
  json jmisses = json::array();
  std::vector<ScanPoint> hits;
  for (const ScanPoint& pt : points) {
    if (pt.found) {
      jpoints.push_back({pt.outer, pt.inner});  // [n, p]
      hits.push_back(pt);
    } else {
      jmisses.push_back(pt.outer);
    }
  }
  fit["points"] = jpoints;
  fit["misses"] = jmisses;
  if (hits.size() >= 2) {
    std::vector<std::array<double, 2>> pairs;
    double n_min = hits.front().outer, n_max = hits.front().outer;
    double p_min = hits.front().inner, p_max = hits.front().inner;
    for (const ScanPoint& pt : hits) {
      pairs.push_back({pt.outer, pt.inner});
      n_min = std::min(n_min, pt.outer);
      n_max = std::max(n_max, pt.outer);
      p_min = std::min(p_min, pt.inner);
      p_max = std::max(p_max, pt.inner);
    }
    const PolyFit loglog = fit_loglog(pairs);
    fit["slope"] = loglog.coefficients[0];
    fit["intercept"] = loglog.coefficients[1];
    fit["residual_rms"] = loglog.residual_rms;
    fit["n_range"] = {n_min, n_max};
    fit["p_range"] = {p_min, p_max};
  } else {
    fit["insufficient_points"] = true;
  }
  write_text_file(out_dir / "fits.json", fit.dump(2) + "\n");

  CurveOutcome outcome;
  outcome.out_dir = out_dir;
  outcome.fits_path = out_dir / "fits.json";
  outcome.points = static_cast<int>(hits.size());
  outcome.misses = static_cast<int>(points.size() - hits.size());
  return outcome;
}

}  // namespace manppa
