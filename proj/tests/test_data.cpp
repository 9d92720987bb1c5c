#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <manppa/baselines.hpp>
#include <manppa/csv.hpp>
#include <manppa/datagen.hpp>
#include <manppa/experiments.hpp>
#include <manppa/geometry.hpp>
#include <manppa/rng.hpp>
#include <manppa/trace.hpp>

#include <nlohmann/json.hpp>

#include <Eigen/SVD>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "oracles.hpp"

using namespace manppa;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "manppa_data_tests" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

// Compares two trace CSVs field by field with the wall-clock column (index 7)
// blanked out; everything else in a rerun must reproduce bit for bit.
bool traces_match_ignoring_wall(const fs::path& a, const fs::path& b) {
  const std::string ta = read_text_file(a);
  const std::string tb = read_text_file(b);
  auto normalize = [](const std::string& text) {
    std::string out;
    int field = 0;
    for (const char c : text) {
      if (c == ',') {
        ++field;
        out += c;
      } else if (c == '\n') {
        field = 0;
        out += c;
      } else if (field != 7) {
        out += c;
      }
    }
    return out;
  };
  return normalize(ta) == normalize(tb);
}

json parse_file(const fs::path& path) { return json::parse(read_text_file(path)); }

constexpr const char* kExpectedResultsHeader =
    "model,n,d_or_gamma,p1,p2_or_p,solver,seed,final_metric,iters,seconds,status,"
    "trace_path";

}  // namespace

// ---------------------------------------------------------------------------
// Subspace-model generator
// ---------------------------------------------------------------------------

TEST_CASE("subspace instances have unit columns, inliers inside the subspace") {
  const RsrInstance inst = gen_rsr({12, 4, 30, 50, 3});
  REQUIRE(inst.Y.rows() == 12);
  REQUIRE(inst.Y.cols() == 80);
  REQUIRE(inst.S.m.rows() == 12);
  REQUIRE(inst.S.m.cols() == 4);
  CHECK((inst.S.m.transpose() * inst.S.m - Matrix::Identity(4, 4)).norm() <= 1e-12);
  for (Index j = 0; j < inst.Y.cols(); ++j) {
    const Vector y = inst.Y.col(j);
    CHECK(std::abs(y.norm() - 1.0) <= 1e-12);
    const double residual = (y - inst.S.m * (inst.S.m.transpose() * y)).norm();
    if (j < 30) {
      CHECK(residual <= 1e-12);  // inliers live in span(S) up to rounding
    } else {
      CHECK(residual > 1e-2);  // generic outliers stay far from the subspace
    }
  }
}

TEST_CASE("subspace instances without outliers have rank exactly d") {
  const RsrInstance inst = gen_rsr({12, 4, 30, 0, 3});
  REQUIRE(inst.Y.cols() == 30);
  const Eigen::JacobiSVD<Matrix> svd(inst.Y);
  const Vector s = svd.singularValues();
  REQUIRE(s.size() == 12);
  CHECK(s[3] > 1e-6 * s[0]);
  for (Index i = 4; i < s.size(); ++i) {
    CHECK(s[i] <= 1e-10 * s[0]);
  }
}

TEST_CASE("subspace generator is deterministic in the seed") {
  const RsrInstance a = gen_rsr({9, 3, 20, 15, 42});
  const RsrInstance b = gen_rsr({9, 3, 20, 15, 42});
  CHECK((a.Y - b.Y).norm() == 0.0);
  CHECK((a.S.m - b.S.m).norm() == 0.0);
  const RsrInstance c = gen_rsr({9, 3, 20, 15, 43});
  CHECK((a.Y - c.Y).norm() > 0.0);
}

TEST_CASE("subspace generator rejects degenerate shapes") {
  CHECK_THROWS_AS(gen_rsr({1, 1, 10, 5, 1}), DegenerateInput);   // n too small
  CHECK_THROWS_AS(gen_rsr({12, 0, 10, 5, 1}), DegenerateInput);  // d < 1
  CHECK_THROWS_AS(gen_rsr({12, 12, 20, 5, 1}), DegenerateInput); // d == n
  CHECK_THROWS_AS(gen_rsr({12, 5, 5, 5, 1}), DegenerateInput);   // d == p1
  CHECK_THROWS_AS(gen_rsr({12, 4, 0, 5, 1}), DegenerateInput);   // no inliers
  CHECK_THROWS_AS(gen_rsr({12, 4, 30, -1, 1}), DegenerateInput); // negative p2
}

TEST_CASE("objective on the orthogonal complement counts only outliers") {
  const Index p1 = 25;
  const RsrInstance inst = gen_rsr({10, 3, p1, 40, 11});
  CounterRng rng(77);
  Vector v(10);
  for (Index i = 0; i < v.size(); ++i) v[i] = rng.next_normal();
  v -= inst.S.m * (inst.S.m.transpose() * v);
  const Vector s = v / v.norm();

  double outlier_sum = 0.0;
  for (Index j = p1; j < inst.Y.cols(); ++j) {
    outlier_sum += std::abs(inst.Y.col(j).dot(s));
  }
  for (Index j = 0; j < p1; ++j) {
    CHECK(std::abs(inst.Y.col(j).dot(s)) <= 1e-13);
  }
  const double f = objective(inst.Y, s);
  CHECK(std::abs(f - outlier_sum) <= 1e-12 * (1.0 + f));
}

// ---------------------------------------------------------------------------
// Dictionary-model generator
// ---------------------------------------------------------------------------

TEST_CASE("dictionary instances factor exactly through the stored coefficients") {
  const OdlInstance inst = gen_odl({10, 317, 0.1, 1});
  REQUIRE(inst.Y.rows() == 10);
  REQUIRE(inst.Y.cols() == 317);
  REQUIRE(inst.A.rows() == 10);
  REQUIRE(inst.A.cols() == 317);
  CHECK((inst.dictionary.m.transpose() * inst.dictionary.m - Matrix::Identity(10, 10))
            .norm() <= 1e-10);
  // The data matrix is the product of the stored factors, bit for bit.
  CHECK((inst.Y - inst.dictionary.m * inst.A).norm() == 0.0);

  // l1 norm of Y^T against a dictionary column equals the matching
  // coefficient row because the remaining rows are annihilated.
  for (Index j = 0; j < 10; ++j) {
    const double f = objective(inst.Y, Vector(inst.dictionary.m.col(j)));
    const double row = inst.A.row(j).cwiseAbs().sum();
    CHECK(std::abs(f - row) <= 1e-12 * (1.0 + row));
  }
}

TEST_CASE("dictionary coefficient sparsity concentrates at the target rate") {
  auto nonzero_fraction = [](const Matrix& A) {
    Index nz = 0;
    for (Index j = 0; j < A.cols(); ++j) {
      for (Index i = 0; i < A.rows(); ++i) {
        if (A(i, j) != 0.0) ++nz;
      }
    }
    return static_cast<double>(nz) / static_cast<double>(A.size());
  };
  {
    const OdlInstance inst = gen_odl({10, 317, 0.1, 1});
    const double se = std::sqrt(0.1 * 0.9 / static_cast<double>(inst.A.size()));
    CHECK(std::abs(nonzero_fraction(inst.A) - 0.1) <= 3.0 * se);
  }
  {
    const OdlInstance inst = gen_odl({20, 500, 0.3, 4});
    const double se = std::sqrt(0.3 * 0.7 / static_cast<double>(inst.A.size()));
    CHECK(std::abs(nonzero_fraction(inst.A) - 0.3) <= 3.0 * se);
  }
}

TEST_CASE("dictionary data columns keep their raw scale") {
  const OdlInstance inst = gen_odl({10, 60, 0.1, 2});
  double worst = 0.0;
  for (Index j = 0; j < inst.Y.cols(); ++j) {
    worst = std::max(worst, std::abs(inst.Y.col(j).norm() - 1.0));
  }
  CHECK(worst > 0.1);  // no column normalization in this model
}

TEST_CASE("dictionary generator determinism and validation") {
  const OdlInstance a = gen_odl({8, 50, 0.25, 9});
  const OdlInstance b = gen_odl({8, 50, 0.25, 9});
  CHECK((a.Y - b.Y).norm() == 0.0);
  CHECK((a.A - b.A).norm() == 0.0);
  CHECK((a.dictionary.m - b.dictionary.m).norm() == 0.0);
  const OdlInstance c = gen_odl({8, 50, 0.25, 10});
  CHECK((a.Y - c.Y).norm() > 0.0);

  CHECK_THROWS_AS(gen_odl({1, 50, 0.25, 1}), DegenerateInput);
  CHECK_THROWS_AS(gen_odl({8, 0, 0.25, 1}), DegenerateInput);
  CHECK_THROWS_AS(gen_odl({8, 50, 0.0, 1}), DegenerateInput);
  CHECK_THROWS_AS(gen_odl({8, 50, 1.0, 1}), DegenerateInput);
  CHECK_THROWS_AS(gen_odl({8, 50, -0.5, 1}), DegenerateInput);
}

// ---------------------------------------------------------------------------
// Spectral initializer
// ---------------------------------------------------------------------------

TEST_CASE("spectral initializer returns the null direction of a single column") {
  Matrix Y(2, 1);
  Y << 1.0, 0.0;
  const Vector v = spectral_init(Y);
  CHECK(std::abs(v[0]) <= 1e-12);
  CHECK(std::abs(std::abs(v[1]) - 1.0) <= 1e-12);
}

TEST_CASE("spectral initializer spans the complement of a pure-inlier instance") {
  const RsrInstance inst = gen_rsr({8, 7, 40, 0, 5});
  const Vector v = spectral_init(inst.Y);
  CHECK(std::abs(v.norm() - 1.0) <= 1e-12);
  CHECK((inst.S.m.transpose() * v).norm() <= 1e-9);
  CHECK(principal_angle(v, inst.S) <= 1e-9);
}

TEST_CASE("spectral initializer satisfies the eigen equation") {
  {
    const RsrInstance inst = gen_rsr({6, 3, 20, 30, 9});
    const Vector v = spectral_init(inst.Y);
    const Matrix cov = inst.Y * inst.Y.transpose();
    const double lambda = v.dot(cov * v);
    CHECK((cov * v - lambda * v).norm() <= 1e-9 * (1.0 + cov.norm()));
  }
  {
    // 3x3: the Rayleigh quotient must agree with the closed-form spectrum.
    const RsrInstance inst = gen_rsr({3, 2, 12, 18, 21});
    const Vector v = spectral_init(inst.Y);
    const Eigen::Matrix3d cov = inst.Y * inst.Y.transpose();
    const double lambda = v.dot(cov * v);
    const std::array<double, 3> eig = oracle::cubic_eigenvalues(cov);
    const double lo = std::min({eig[0], eig[1], eig[2]});
    CHECK(std::abs(lambda - lo) <= 1e-9 * (1.0 + cov.norm()));
  }
}

// ---------------------------------------------------------------------------
// Instance serialization
// ---------------------------------------------------------------------------

TEST_CASE("subspace instances round-trip through the directory format") {
  const fs::path dir = fresh_dir("rsr_roundtrip");
  const RsrInstance inst = gen_rsr({7, 3, 12, 20, 13});
  save_instance(dir, inst);

  const Instance loaded = load_instance(dir);
  CHECK((loaded.Y - inst.Y).norm() == 0.0);
  CHECK((loaded.truth - inst.S.m).norm() == 0.0);
  CHECK(loaded.meta.model == "rsr");
  CHECK(loaded.meta.n == 7);
  CHECK(loaded.meta.d == 3);
  CHECK(loaded.meta.p1 == 12);
  CHECK(loaded.meta.p2 == 20);
  CHECK(loaded.meta.seed == 13);
  CHECK(loaded.meta.generator == kGeneratorName);
  CHECK(loaded.meta.normalized_columns);

  // Serialization is deterministic: saving again produces identical bytes.
  const fs::path dir2 = fresh_dir("rsr_roundtrip_2");
  save_instance(dir2, inst);
  for (const char* file : {"Y.csv", "truth.csv", "meta.json"}) {
    CHECK(read_text_file(dir / file) == read_text_file(dir2 / file));
  }

  // Rebuilding from the metadata alone reproduces the same matrix.
  const Instance rebuilt = generate_instance(loaded.meta);
  CHECK((rebuilt.Y - loaded.Y).norm() == 0.0);
  CHECK((rebuilt.truth - loaded.truth).norm() == 0.0);
}

TEST_CASE("dictionary instances round-trip through the directory format") {
  const fs::path dir = fresh_dir("odl_roundtrip");
  const OdlInstance inst = gen_odl({6, 40, 0.25, 3});
  save_instance(dir, inst);

  const Instance loaded = load_instance(dir);
  CHECK((loaded.Y - inst.Y).norm() == 0.0);
  CHECK((loaded.truth - inst.dictionary.m).norm() == 0.0);
  CHECK(loaded.meta.model == "odl");
  CHECK(loaded.meta.n == 6);
  CHECK(loaded.meta.p == 40);
  CHECK(loaded.meta.gamma == 0.25);
  CHECK(loaded.meta.seed == 3);
  CHECK(!loaded.meta.normalized_columns);

  const Instance rebuilt = generate_instance(loaded.meta);
  CHECK((rebuilt.Y - loaded.Y).norm() == 0.0);
}

TEST_CASE("instance loading reports missing or corrupt directories") {
  CHECK_THROWS_AS(load_instance(fs::temp_directory_path() / "manppa_no_such_dir"),
                  IoError);
  const fs::path dir = fresh_dir("corrupt_meta");
  save_instance(dir, gen_rsr({5, 2, 8, 4, 1}));
  write_text_file(dir / "meta.json", "{not json");
  CHECK_THROWS_AS(load_instance(dir), IoError);

  InstanceMeta meta;
  meta.model = "unknown";
  CHECK_THROWS_AS(generate_instance(meta), DegenerateInput);
}

// ---------------------------------------------------------------------------
// Run configuration resolution
// ---------------------------------------------------------------------------

TEST_CASE("solver configurations canonicalize to identical documents") {
  const std::string a = resolve_run_config("manppa", "", 1, 1).config_json;
  const std::string b = resolve_run_config("manppa", "{}", 9, 1).config_json;
  CHECK(a == b);
  // Restating a default leaves the canonical form unchanged.
  const std::string c = resolve_run_config("manppa", R"({"t":0.1})", 1, 1).config_json;
  CHECK(c == a);

  const RunConfig d = resolve_run_config("manppa", R"({"t":0.25})", 7, 1);
  CHECK(d.solver == "manppa");
  CHECK(d.seed == 7);
  CHECK(d.q == 1);
  const json parsed = json::parse(d.config_json);
  CHECK(parsed.at("t").get<double>() == 0.25);
  CHECK(parsed.at("beta").get<double>() == 0.5);  // defaults filled in
  CHECK(parsed.at("alm").at("sigma_cap").get<double>() == 1e6);

  const json nested = json::parse(
      resolve_run_config("manppa", R"({"alm":{"shrink":0.5}})", 1, 1).config_json);
  CHECK(nested.at("alm").at("shrink").get<double>() == 0.5);
  CHECK(nested.at("alm").at("backtrack").get<double>() == 0.5);

  const json st = json::parse(resolve_run_config("stmanppa", "", 1, 1).config_json);
  CHECK(st.at("output").get<std::string>() == "last");
  CHECK(st.at("t0").get<double>() == 0.6);
}

TEST_CASE("solver configuration validation rejects malformed requests") {
  CHECK_THROWS_AS(resolve_run_config("nosuch", "", 1, 1), ConfigError);
  CHECK_THROWS_AS(resolve_run_config("manppa", R"({"tt":1})", 1, 1), ConfigError);
  CHECK_THROWS_AS(resolve_run_config("manppa", R"({"alm":{"zz":1}})", 1, 1),
                  ConfigError);
  CHECK_THROWS_AS(resolve_run_config("manppa", R"({"alm":2.0})", 1, 1), ConfigError);
  CHECK_THROWS_AS(resolve_run_config("manppa", R"({"t":{"a":1}})", 1, 1), ConfigError);
  CHECK_THROWS_AS(resolve_run_config("manppa", R"({"t":[1]})", 1, 1), ConfigError);
  CHECK_THROWS_AS(resolve_run_config("manppa", "{", 1, 1), ConfigError);
  CHECK_THROWS_AS(resolve_run_config("manppa", "", 1, 0), ConfigError);
  CHECK_THROWS_AS(resolve_run_config("manppa", "", 1, 2), ConfigError);
  CHECK_THROWS_AS(resolve_run_config("psgm", "", 1, 2), ConfigError);
  // The multi-column solvers accept q > 1.
  CHECK_NOTHROW(resolve_run_config("irls", "", 1, 2));
  CHECK_NOTHROW(resolve_run_config("seq-manppa", "", 1, 3));
}

// ---------------------------------------------------------------------------
// run_solver wiring
// ---------------------------------------------------------------------------

TEST_CASE("run_solver records the subspace recovery angle as its metric") {
  InstanceMeta meta;
  meta.model = "rsr";
  meta.n = 8;
  meta.d = 7;
  meta.p1 = 60;
  meta.p2 = 90;
  meta.seed = 3;
  const Instance inst = generate_instance(meta);
  const RunResult rr = run_solver(inst, resolve_run_config("manppa", "", 3, 1));

  REQUIRE(rr.X.rows() == 8);
  REQUIRE(rr.X.cols() == 1);
  CHECK(std::abs(rr.X.col(0).norm() - 1.0) <= 1e-12);
  CHECK(rr.status == "converged");
  CHECK(rr.iters == static_cast<int>(rr.trace.records.size()));
  const SubspaceBasis S = SubspaceBasis::make(inst.truth);
  CHECK(rr.final_metric == principal_angle(Vector(rr.X.col(0)), S));
  CHECK(rr.final_metric < 1e-2);
  CHECK(rr.final_objective == objective(inst.Y, Vector(rr.X.col(0))));
  CHECK(rr.trace.solver == "manppa");
  REQUIRE(!rr.trace.records.empty());
  CHECK(rr.trace.records.back().metric == rr.final_metric);
}

TEST_CASE("run_solver records the dictionary angle for the dictionary model") {
  InstanceMeta meta;
  meta.model = "odl";
  meta.n = 6;
  meta.p = 40;
  meta.gamma = 0.25;
  meta.seed = 3;
  const Instance inst = generate_instance(meta);
  const RunResult rr = run_solver(inst, resolve_run_config("manppa", "", 3, 1));
  const StiefelPoint dict = StiefelPoint::make(inst.truth);
  CHECK(rr.final_metric == angle_to_dictionary(Vector(rr.X.col(0)), dict).first);
  CHECK(rr.final_metric >= 0.0);
  CHECK(rr.final_metric <= 1.5707963267948966 + 1e-12);
}

TEST_CASE("run_solver drives the multi-column solvers with q columns") {
  InstanceMeta meta;
  meta.model = "rsr";
  meta.n = 8;
  meta.d = 6;
  meta.p1 = 60;
  meta.p2 = 90;
  meta.seed = 3;
  const Instance inst = generate_instance(meta);

  const RunResult irls = run_solver(inst, resolve_run_config("irls", "", 3, 2));
  REQUIRE(irls.X.cols() == 2);
  CHECK((irls.X.transpose() * irls.X - Matrix::Identity(2, 2)).norm() <= 1e-8);
  const SubspaceBasis S = SubspaceBasis::make(inst.truth);
  CHECK(irls.final_metric == subspace_recovery_error(StiefelPoint{irls.X}, S));
  CHECK(irls.final_objective == l12_objective(inst.Y, irls.X));

  const RunResult seq = run_solver(inst, resolve_run_config("seq-manppa", "", 3, 2));
  REQUIRE(seq.X.cols() == 2);
  CHECK((seq.X.transpose() * seq.X - Matrix::Identity(2, 2)).norm() <= 1e-10);
  CHECK(seq.trace.layout == TraceLayout::kPerColumn);
  REQUIRE(!seq.trace.records.empty());
  CHECK(seq.trace.records.front().column == 0);
  CHECK(seq.trace.records.back().column == 1);

  Instance bad = inst;
  bad.meta.model = "nosuch";
  CHECK_THROWS_AS(run_solver(bad, resolve_run_config("manppa", "", 3, 1)),
                  ConfigError);
}

// ---------------------------------------------------------------------------
// Fits
// ---------------------------------------------------------------------------

TEST_CASE("quadratic fit recovers exact coefficients") {
  std::vector<std::array<double, 2>> points;
  for (double x = 1.0; x <= 6.0; x += 1.0) {
    points.push_back({x, 2.0 * x * x - 3.0 * x + 0.5});
  }
  const PolyFit fit = fit_quadratic(points);
  REQUIRE(fit.coefficients.size() == 3);
  CHECK(std::abs(fit.coefficients[0] - 2.0) <= 1e-10);
  CHECK(std::abs(fit.coefficients[1] + 3.0) <= 1e-10);
  CHECK(std::abs(fit.coefficients[2] - 0.5) <= 1e-10);
  CHECK(fit.residual_rms <= 1e-10);

  CHECK_THROWS_AS(fit_quadratic({{1.0, 1.0}, {2.0, 2.0}}), ConfigError);
}

TEST_CASE("log-log fit recovers exact power laws") {
  std::vector<std::array<double, 2>> points;
  for (const double x : {2.0, 4.0, 8.0, 16.0, 32.0}) {
    points.push_back({x, 3.0 * std::pow(x, 1.7)});
  }
  const PolyFit fit = fit_loglog(points);
  REQUIRE(fit.coefficients.size() == 2);
  CHECK(std::abs(fit.coefficients[0] - 1.7) <= 1e-10);
  CHECK(std::abs(fit.coefficients[1] - std::log(3.0)) <= 1e-10);
  CHECK(fit.residual_rms <= 1e-10);

  CHECK_THROWS_AS(fit_loglog({{1.0, 1.0}}), ConfigError);
  CHECK_THROWS_AS(fit_loglog({{1.0, 1.0}, {-2.0, 3.0}}), ConfigError);
  CHECK_THROWS_AS(fit_loglog({{1.0, 0.0}, {2.0, 3.0}}), ConfigError);
}

// ---------------------------------------------------------------------------
// Result tables
// ---------------------------------------------------------------------------

TEST_CASE("result rows round-trip and the table stays append-only") {
  const fs::path dir = fresh_dir("rows_roundtrip");
  const fs::path csv = dir / "results.csv";

  ResultRow r1;
  r1.model = "rsr";
  r1.n = 8;
  r1.d_or_gamma = "7";
  r1.p1 = "60";
  r1.p2_or_p = "90";
  r1.solver = "manppa";
  r1.seed = 5;
  r1.final_metric = 4.0 * std::atan(1.0) * 1e-10;  // an irrational double
  r1.iters = 9;
  r1.seconds = 0.125;
  r1.status = "converged";
  r1.trace_path = "traces/a.csv";

  ResultRow r2;
  r2.model = "odl";
  r2.n = 6;
  r2.d_or_gamma = "0.3";
  r2.p1 = "";
  r2.p2_or_p = "40";
  r2.solver = "manppa";
  r2.seed = 6;
  r2.iters = 0;
  r2.seconds = 0.0;
  r2.status = "failed: bad, thing";  // commas must not break the table
  r2.trace_path = "";

  append_result_rows(csv, {r1, r2});
  const std::string first_bytes = read_text_file(csv);
  CHECK(first_bytes.rfind(kExpectedResultsHeader, 0) == 0);

  std::vector<ResultRow> rows = read_result_rows(csv);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].model == "rsr");
  CHECK(rows[0].n == 8);
  CHECK(rows[0].d_or_gamma == "7");
  CHECK(rows[0].p1 == "60");
  CHECK(rows[0].p2_or_p == "90");
  CHECK(rows[0].seed == 5);
  CHECK(rows[0].final_metric == r1.final_metric);  // shortest round-trip format
  CHECK(rows[0].iters == 9);
  CHECK(rows[0].seconds == 0.125);
  CHECK(rows[0].status == "converged");
  CHECK(rows[0].trace_path == "traces/a.csv");
  CHECK(rows[1].p1 == "");
  CHECK(std::isnan(rows[1].final_metric));
  CHECK(rows[1].status == "failed: bad; thing");  // sanitized separator

  ResultRow r3 = r1;
  r3.seed = 7;
  append_result_rows(csv, {r3});
  const std::string second_bytes = read_text_file(csv);
  CHECK(second_bytes.rfind(first_bytes, 0) == 0);  // strictly appended
  rows = read_result_rows(csv);
  REQUIRE(rows.size() == 3);
  CHECK(rows[2].seed == 7);

  CHECK_THROWS_AS(read_result_rows(dir / "missing.csv"), IoError);
  write_text_file(dir / "bad_header.csv", "nope\n");
  CHECK_THROWS_AS(read_result_rows(dir / "bad_header.csv"), IoError);
  write_text_file(dir / "short_row.csv",
                  std::string(kExpectedResultsHeader) + "\nrsr,8\n");
  CHECK_THROWS_AS(read_result_rows(dir / "short_row.csv"), IoError);
}

TEST_CASE("content keys are stable and sensitive to every identifying field") {
  // Reference vectors for the 64-bit FNV-1a hash.
  CHECK(fnv1a64("") == 0xCBF29CE484222325ULL);
  CHECK(fnv1a64("a") == 0xAF63DC4C8601EC8CULL);
  CHECK(hex64(0) == "0000000000000000");
  CHECK(hex64(0xDEADBEEFULL) == "00000000deadbeef");

  ResultRow row;
  row.model = "rsr";
  row.n = 8;
  row.d_or_gamma = "7";
  row.p1 = "60";
  row.p2_or_p = "90";
  row.solver = "manppa";
  row.seed = 5;
  const std::string config = resolve_run_config("manppa", "", 5, 1).config_json;

  const std::string key = result_row_key(row, 1, config);
  CHECK(key.size() == 16);
  CHECK(key.find_first_not_of("0123456789abcdef") == std::string::npos);
  CHECK(result_row_key(row, 1, config) == key);  // pure function

  ResultRow other = row;
  other.seed = 6;
  CHECK(result_row_key(other, 1, config) != key);
  other = row;
  other.solver = "psgm";
  CHECK(result_row_key(other, 1, config) != key);
  other = row;
  other.p1 = "80";
  CHECK(result_row_key(other, 1, config) != key);
  CHECK(result_row_key(row, 2, config) != key);
  const std::string tweaked = resolve_run_config("manppa", R"({"t":0.2})", 5, 1)
                                  .config_json;
  CHECK(result_row_key(row, 1, tweaked) != key);

  // Timing and outcome fields do not participate in the identity.
  other = row;
  other.seconds = 123.0;
  other.final_metric = 0.5;
  other.status = "different";
  CHECK(result_row_key(other, 1, config) == key);
}

// ---------------------------------------------------------------------------
// Grids
// ---------------------------------------------------------------------------

TEST_CASE("an empty grid still produces a results table with a header") {
  const fs::path dir = fresh_dir("grid_empty");
  json grid;
  grid["model"] = "rsr";
  grid["out"] = dir.string();
  grid["instances"] = json::array();
  grid["solvers"] = json::array();
  grid["seeds"] = json::array();
  const GridOutcome outcome = run_grid(grid.dump(), 1);
  CHECK(outcome.cells_total == 0);
  CHECK(outcome.cells_run == 0);
  CHECK(outcome.cells_skipped == 0);
  CHECK(read_text_file(dir / "results.csv") ==
        std::string(kExpectedResultsHeader) + "\n");
  const json run_doc = parse_file(dir / "run.json");
  CHECK(run_doc.at("generator").get<std::string>() == kGeneratorName);
}

TEST_CASE("a single-cell grid reproduces a direct solver run bit for bit") {
  const fs::path dir = fresh_dir("grid_single");
  json grid;
  grid["model"] = "rsr";
  grid["out"] = dir.string();
  grid["instances"] = {{{"n", 8}, {"d", 7}, {"p1", 60}, {"p2", 90}}};
  grid["solvers"] = {{{"name", "manppa"}}};
  grid["seeds"] = {5};
  const GridOutcome outcome = run_grid(grid.dump(), 1);
  CHECK(outcome.cells_total == 1);
  CHECK(outcome.cells_run == 1);
  CHECK(outcome.cells_skipped == 0);

  const std::vector<ResultRow> rows = read_result_rows(dir / "results.csv");
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].model == "rsr");
  CHECK(rows[0].n == 8);
  CHECK(rows[0].d_or_gamma == "7");
  CHECK(rows[0].p1 == "60");
  CHECK(rows[0].p2_or_p == "90");
  CHECK(rows[0].solver == "manppa");
  CHECK(rows[0].seed == 5);

  // The same cell run directly through the library must agree exactly.
  InstanceMeta meta;
  meta.model = "rsr";
  meta.n = 8;
  meta.d = 7;
  meta.p1 = 60;
  meta.p2 = 90;
  meta.seed = 5;
  const RunResult direct =
      run_solver(generate_instance(meta), resolve_run_config("manppa", "", 5, 1));
  CHECK(rows[0].final_metric == direct.final_metric);
  CHECK(rows[0].iters == direct.iters);
  CHECK(rows[0].status == direct.status);

  CHECK(rows[0].trace_path == "traces/rsr_n8_d7_p160_p290_manppa_s5.csv");
  const fs::path trace_file = dir / rows[0].trace_path;
  REQUIRE(fs::exists(trace_file));
  const fs::path direct_trace = dir / "direct_trace.csv";
  write_trace_csv(direct_trace, direct.trace);
  CHECK(traces_match_ignoring_wall(trace_file, direct_trace));

  const json run_doc = parse_file(dir / "run.json");
  CHECK(run_doc.at("resolved_solvers").at("manppa").at("t").get<double>() == 0.1);

  // A second directory with the same seeds reproduces everything but timing.
  const fs::path dir2 = fresh_dir("grid_single_2");
  grid["out"] = dir2.string();
  run_grid(grid.dump(), 1);
  const std::vector<ResultRow> rows2 = read_result_rows(dir2 / "results.csv");
  REQUIRE(rows2.size() == 1);
  CHECK(rows2[0].final_metric == rows[0].final_metric);
  CHECK(rows2[0].iters == rows[0].iters);
  CHECK(rows2[0].status == rows[0].status);
  CHECK(rows2[0].trace_path == rows[0].trace_path);
  CHECK(traces_match_ignoring_wall(dir2 / rows2[0].trace_path, trace_file));
}

TEST_CASE("rerunning a completed grid is a no-op and extensions only append") {
  const fs::path dir = fresh_dir("grid_idempotent");
  json grid;
  grid["model"] = "rsr";
  grid["out"] = dir.string();
  grid["instances"] = {{{"n", 8}, {"d", 7}, {"p1", 60}, {"p2", 90}}};
  grid["solvers"] = {{{"name", "manppa"}}};
  grid["seeds"] = {5};
  run_grid(grid.dump(), 1);
  const std::string bytes = read_text_file(dir / "results.csv");

  const GridOutcome again = run_grid(grid.dump(), 1);
  CHECK(again.cells_run == 0);
  CHECK(again.cells_skipped == 1);
  CHECK(read_text_file(dir / "results.csv") == bytes);

  grid["seeds"] = {5, 6};
  const GridOutcome extended = run_grid(grid.dump(), 1);
  CHECK(extended.cells_total == 2);
  CHECK(extended.cells_run == 1);
  CHECK(extended.cells_skipped == 1);
  const std::string extended_bytes = read_text_file(dir / "results.csv");
  CHECK(extended_bytes.rfind(bytes, 0) == 0);  // old rows untouched
  const std::vector<ResultRow> rows = read_result_rows(dir / "results.csv");
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].seed == 5);
  CHECK(rows[1].seed == 6);

  // Changing the solver configuration changes the cell identity, so the
  // same shape runs again instead of being skipped.
  grid["seeds"] = {5};
  grid["solvers"] = {{{"name", "manppa"}, {"label", "manppa-t2"},
                      {"config", {{"t", 0.2}}}}};
  const GridOutcome reconfigured = run_grid(grid.dump(), 1);
  CHECK(reconfigured.cells_run == 1);
  REQUIRE(read_result_rows(dir / "results.csv").size() == 3);
}

TEST_CASE("failing cells are recorded as rows without aborting the grid") {
  const fs::path dir = fresh_dir("grid_failures");
  json grid;
  grid["model"] = "rsr";
  grid["out"] = dir.string();
  // The first shape violates the generator precondition (d >= p1).
  grid["instances"] = {{{"n", 8}, {"d", 7}, {"p1", 5}, {"p2", 10}},
                       {{"n", 8}, {"d", 7}, {"p1", 60}, {"p2", 90}}};
  grid["solvers"] = {{{"name", "manppa"}}};
  grid["seeds"] = {3};
  const GridOutcome outcome = run_grid(grid.dump(), 1);
  CHECK(outcome.cells_total == 2);
  CHECK(outcome.cells_run == 2);

  const std::vector<ResultRow> rows = read_result_rows(dir / "results.csv");
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].status.rfind("failed: gen_rsr", 0) == 0);
  CHECK(rows[0].iters == 0);
  CHECK(rows[0].trace_path == "");
  CHECK(std::isnan(rows[0].final_metric));
  CHECK(rows[1].status == "converged");

  // Failure rows participate in idempotence like any other row.
  const GridOutcome again = run_grid(grid.dump(), 1);
  CHECK(again.cells_run == 0);
  CHECK(again.cells_skipped == 2);
}

TEST_CASE("grid documents are validated before any cell runs") {
  const fs::path dir = fresh_dir("grid_validation");
  auto base = [&]() {
    json grid;
    grid["model"] = "rsr";
    grid["out"] = dir.string();
    grid["instances"] = {{{"n", 8}, {"d", 7}, {"p1", 60}, {"p2", 90}}};
    grid["solvers"] = {{{"name", "manppa"}}};
    grid["seeds"] = {5};
    return grid;
  };

  CHECK_THROWS_AS(run_grid("{", 1), ConfigError);
  CHECK_THROWS_AS(run_grid("{}", 1), ConfigError);  // model/out required

  json g = base();
  g["bogus"] = 1;
  CHECK_THROWS_AS(run_grid(g.dump(), 1), ConfigError);

  g = base();
  g["model"] = "nosuch";
  CHECK_THROWS_AS(run_grid(g.dump(), 1), ConfigError);

  g = base();
  g["solvers"] = {{{"name", "manppa"}}, {{"name", "manppa"}}};
  CHECK_THROWS_AS(run_grid(g.dump(), 1), ConfigError);  // duplicate label

  g = base();
  g["solvers"] = {{{"name", "manppa"}, {"label", "has space"}}};
  CHECK_THROWS_AS(run_grid(g.dump(), 1), ConfigError);

  g = base();
  g["solvers"] = {{{"label", "x"}}};
  CHECK_THROWS_AS(run_grid(g.dump(), 1), ConfigError);  // entry without a name

  g = base();
  g["solvers"] = {{{"name", "manppa"}, {"zz", 1}}};
  CHECK_THROWS_AS(run_grid(g.dump(), 1), ConfigError);

  g = base();
  g["solvers"] = {{{"name", "manppa"}, {"config", {{"tt", 1}}}}};
  CHECK_THROWS_AS(run_grid(g.dump(), 1), ConfigError);

  g = base();
  g["instances"] = {{{"n", 8}, {"d", 7}, {"p1", 60}, {"p2", 90}, {"zz", 1}}};
  CHECK_THROWS_AS(run_grid(g.dump(), 1), ConfigError);
}

// ---------------------------------------------------------------------------
// Recovery-boundary curves
// ---------------------------------------------------------------------------

namespace {

// Index of per-cell metrics keyed by (outer, inner, seed), rebuilt from the
// persisted table so the scan below is independent of the curve driver.
struct MetricTable {
  std::map<std::tuple<long long, long long, std::uint64_t>, double> metric;

  static MetricTable from_rsr_rows(const std::vector<ResultRow>& rows) {
    MetricTable table;
    for (const ResultRow& row : rows) {
      table.metric[{std::stoll(row.p2_or_p), std::stoll(row.p1), row.seed}] =
          row.final_metric;
    }
    return table;
  }

  static MetricTable from_odl_rows(const std::vector<ResultRow>& rows) {
    MetricTable table;
    for (const ResultRow& row : rows) {
      table.metric[{row.n, std::stoll(row.p2_or_p), row.seed}] = row.final_metric;
    }
    return table;
  }

  // Mean over the trial seeds; requires every trial row to be present.
  double mean(long long outer, long long inner, std::uint64_t seeds_base,
              int trials) const {
    double sum = 0.0;
    for (int t = 0; t < trials; ++t) {
      const auto it = metric.find({outer, inner, seeds_base + t});
      REQUIRE(it != metric.end());
      sum += it->second;
    }
    return sum / trials;
  }

  bool has(long long outer, long long inner, std::uint64_t seed) const {
    return metric.count({outer, inner, seed}) != 0;
  }
};

}  // namespace

TEST_CASE("tolerance curve picks the smallest qualifying inlier count") {
  const fs::path dir = fresh_dir("rsr_curve");
  json spec;
  spec["out"] = dir.string();
  spec["n"] = 8;
  spec["d"] = 7;
  spec["p2_grid"] = {30, 60, 90};
  spec["p1_min"] = 20;
  spec["p1_max"] = 120;
  spec["p1_step"] = 20;
  spec["trials"] = 2;
  spec["angle_threshold"] = 1e-10;
  spec["seeds_base"] = 1;
  spec["jobs"] = 1;

  const CurveOutcome outcome = rsr_tolerance_curve(spec.dump(), 1);
  CHECK(outcome.points == 3);
  CHECK(outcome.misses == 0);
  const json fits = parse_file(dir / "fits.json");
  const std::string fits_bytes = read_text_file(dir / "fits.json");
  CHECK(fits.at("kind").get<std::string>() == "rsr_quadratic");
  CHECK(fits.at("threshold").get<double>() == 1e-10);
  CHECK(fits.at("trials").get<int>() == 2);
  REQUIRE(fits.at("points").size() == 3);
  CHECK(fits.at("misses").empty());

  // Exhaustive rescan of the persisted per-run table: for every outlier
  // count, the recorded point must be the smallest inlier count whose mean
  // metric beats the threshold, and runs past it must not have happened.
  const MetricTable table =
      MetricTable::from_rsr_rows(read_result_rows(dir / "results.csv"));
  std::vector<std::array<double, 2>> expected_points;
  for (const long long p2 : {30, 60, 90}) {
    long long selected = -1;
    for (long long p1 = 20; p1 <= 120; p1 += 20) {
      const double mean = table.mean(p2, p1, 1, 2);
      if (mean < 1e-10) {
        selected = p1;
        break;
      }
    }
    REQUIRE(selected > 0);
    for (long long p1 = selected + 20; p1 <= 120; p1 += 20) {
      CHECK(!table.has(p2, p1, 1));  // the scan stops at the first success
    }
    expected_points.push_back({static_cast<double>(selected),
                               static_cast<double>(p2)});
  }
  for (size_t i = 0; i < expected_points.size(); ++i) {
    CHECK(fits.at("points")[i][0].get<double>() == expected_points[i][0]);
    CHECK(fits.at("points")[i][1].get<double>() == expected_points[i][1]);
  }
  // Deterministic solver + fixed seeds: the boundary itself is pinned.
  CHECK(expected_points[0][0] == 40.0);
  CHECK(expected_points[1][0] == 60.0);
  CHECK(expected_points[2][0] == 100.0);

  // Three distinct points determine the quadratic exactly.
  REQUIRE(fits.at("coefficients").size() == 3);
  const double a = fits.at("coefficients")[0].get<double>();
  const double b = fits.at("coefficients")[1].get<double>();
  const double c = fits.at("coefficients")[2].get<double>();
  for (const auto& [p1, p2] : expected_points) {
    CHECK(std::abs(a * p1 * p1 + b * p1 + c - p2) <= 1e-6);
  }
  CHECK(fits.at("residual_rms").get<double>() <= 1e-9);
  CHECK(fits.at("p1_range")[0].get<double>() == 40.0);
  CHECK(fits.at("p1_range")[1].get<double>() == 100.0);
  CHECK(fits.at("p2_range")[0].get<double>() == 30.0);
  CHECK(fits.at("p2_range")[1].get<double>() == 90.0);

  // An unreachable threshold flags every pair instead of fitting; the runs
  // it adds reuse the same table.
  spec["angle_threshold"] = 0.0;
  const CurveOutcome misses = rsr_tolerance_curve(spec.dump(), 1);
  CHECK(misses.points == 0);
  CHECK(misses.misses == 3);
  const json missed_fits = parse_file(dir / "fits.json");
  CHECK(missed_fits.at("insufficient_points").get<bool>());
  CHECK(missed_fits.at("points").empty());
  REQUIRE(missed_fits.at("misses").size() == 3);
  CHECK(missed_fits.at("misses")[0].get<double>() == 30.0);
  CHECK(missed_fits.at("misses")[2].get<double>() == 90.0);

  // Re-running the original scan touches no cells and reproduces the fit
  // document byte for byte.
  spec["angle_threshold"] = 1e-10;
  const std::string table_bytes = read_text_file(dir / "results.csv");
  const CurveOutcome rerun = rsr_tolerance_curve(spec.dump(), 1);
  CHECK(rerun.points == 3);
  CHECK(read_text_file(dir / "results.csv") == table_bytes);
  CHECK(read_text_file(dir / "fits.json") == fits_bytes);
}

TEST_CASE("sample-complexity curve picks the smallest qualifying sample count") {
  const fs::path dir = fresh_dir("odl_curve");
  json spec;
  spec["out"] = dir.string();
  spec["n_grid"] = {5, 8};
  spec["gamma"] = 0.3;
  spec["offsets"] = {10, 30, 60};
  spec["trials"] = 2;
  spec["angle_threshold"] = 0.1;
  spec["seeds_base"] = 1;
  spec["jobs"] = 1;

  const CurveOutcome outcome = odl_fit_curve(spec.dump(), 1);
  CHECK(outcome.points == 2);
  CHECK(outcome.misses == 0);
  const json fits = parse_file(dir / "fits.json");
  CHECK(fits.at("kind").get<std::string>() == "odl_loglog");
  CHECK(fits.at("gamma").get<double>() == 0.3);
  REQUIRE(fits.at("points").size() == 2);

  const MetricTable table =
      MetricTable::from_odl_rows(read_result_rows(dir / "results.csv"));
  std::vector<std::array<double, 2>> expected_points;
  for (const long long n : {5, 8}) {
    long long selected = -1;
    bool past_selection = false;
    for (const long long off : {10, 30, 60}) {
      const long long p = 2 * n + off;
      if (past_selection) {
        CHECK(!table.has(n, p, 1));
        continue;
      }
      const double mean = table.mean(n, p, 1, 2);
      if (mean < 0.1) {
        selected = p;
        past_selection = true;
      }
    }
    REQUIRE(selected > 0);
    expected_points.push_back({static_cast<double>(n), static_cast<double>(selected)});
  }
  for (size_t i = 0; i < expected_points.size(); ++i) {
    CHECK(fits.at("points")[i][0].get<double>() == expected_points[i][0]);
    CHECK(fits.at("points")[i][1].get<double>() == expected_points[i][1]);
  }
  // Pinned boundary for these seeds: n=5 qualifies immediately, n=8 only
  // after the scan advances past two failing sample counts.
  CHECK(expected_points[0][1] == 20.0);
  CHECK(expected_points[1][1] == 76.0);

  // Two points determine the log-log line exactly.
  const double slope = std::log(76.0 / 20.0) / std::log(8.0 / 5.0);
  CHECK(std::abs(fits.at("slope").get<double>() - slope) <= 1e-10);
  CHECK(std::abs(fits.at("intercept").get<double>() -
                 (std::log(20.0) - slope * std::log(5.0))) <= 1e-10);
  CHECK(fits.at("residual_rms").get<double>() <= 1e-12);
  CHECK(fits.at("n_range")[0].get<double>() == 5.0);
  CHECK(fits.at("n_range")[1].get<double>() == 8.0);
  CHECK(fits.at("p_range")[0].get<double>() == 20.0);
  CHECK(fits.at("p_range")[1].get<double>() == 76.0);

  // Unreachable threshold: every n is flagged, no fit is produced.
  spec["angle_threshold"] = 0.0;
  const CurveOutcome misses = odl_fit_curve(spec.dump(), 1);
  CHECK(misses.points == 0);
  CHECK(misses.misses == 2);
  const json missed_fits = parse_file(dir / "fits.json");
  CHECK(missed_fits.at("insufficient_points").get<bool>());
  REQUIRE(missed_fits.at("misses").size() == 2);
  CHECK(missed_fits.at("misses")[0].get<double>() == 5.0);
  CHECK(missed_fits.at("misses")[1].get<double>() == 8.0);
}

TEST_CASE("curve presets parse and cover both scales") {
  for (const bool full : {false, true}) {
    const json rsr = json::parse(rsr_curve_preset(full));
    CHECK(rsr.at("trials").get<int>() == (full ? 10 : 3));
    CHECK(rsr.at("angle_threshold").get<double>() == 0.1);
    CHECK(rsr.at("p1_min").get<int>() == 60);
    CHECK(rsr.at("p1_max").get<int>() == 260);
    const json odl = json::parse(odl_curve_preset(full));
    CHECK(odl.at("trials").get<int>() == (full ? 10 : 3));
    CHECK(odl.at("n_grid").size() == (full ? 10 : 3));
  }
}
