#include "manppa/trace.hpp"

#include "manppa/csv.hpp"

#include <nlohmann/json.hpp>

#include <fstream>

namespace manppa {
namespace {

void append_row(std::string& out, const IterateTrace& trace, const TraceRecord& r) {
  out += std::to_string(r.k);
  out += ',';
  out += format_double(r.objective);
  out += ',';
  out += format_double(r.metric);
  out += ',';
  out += format_double(r.alpha);
  out += ',';
  out += format_double(r.d_norm);
  out += ',';
  out += std::to_string(r.alm_iters);
  out += ',';
  out += std::to_string(r.ssn_iters);
  out += ',';
  out += format_double(r.wall_seconds);
  if (trace.layout == TraceLayout::kStochastic) {
    out += ',';
    out += std::to_string(r.epoch);
    out += ',';
    out += format_double(r.t_k);
    out += ',';
    out += std::to_string(r.step_case);
  } else if (trace.layout == TraceLayout::kPerColumn) {
    out += ',';
    out += std::to_string(r.column);
  }
  out += '\n';
}

}  // namespace

void write_trace_csv(const std::filesystem::path& path, const IterateTrace& trace) {
  std::string out = "k,objective,metric,alpha,d_norm,alm_iters,ssn_iters,wall_seconds";
  if (trace.layout == TraceLayout::kStochastic) {
    out += ",epoch,t_k,case";
  } else if (trace.layout == TraceLayout::kPerColumn) {
    out += ",column";
  }
  out += '\n';
  for (const TraceRecord& r : trace.records) {
    append_row(out, trace, r);
  }
  write_text_file(path, out);
}

std::string trace_to_json(const IterateTrace& trace) {
  nlohmann::json doc;
  doc["solver"] = trace.solver;
  doc["initial_objective"] = trace.initial_objective;
  doc["t"] = trace.t;
  nlohmann::json records = nlohmann::json::array();
  for (const TraceRecord& r : trace.records) {
    nlohmann::json row;
    row["k"] = r.k;
    row["objective"] = r.objective;
    row["metric"] = r.metric;
    row["alpha"] = r.alpha;
    row["d_norm"] = r.d_norm;
    row["alm_iters"] = r.alm_iters;
    row["ssn_iters"] = r.ssn_iters;
    row["wall_seconds"] = r.wall_seconds;
    if (trace.layout == TraceLayout::kStochastic) {
      row["epoch"] = r.epoch;
      row["t_k"] = r.t_k;
      row["case"] = r.step_case;
    } else if (trace.layout == TraceLayout::kPerColumn) {
      row["column"] = r.column;
    }
    records.push_back(std::move(row));
  }
  doc["records"] = std::move(records);
  return doc.dump(2) + "\n";
}

}  // namespace manppa
