#include "manppa/datagen.hpp"

#include "manppa/csv.hpp"
#include "manppa/eigensolver.hpp"
#include "manppa/geometry.hpp"

#include <nlohmann/json.hpp>

#include <cmath>

namespace manppa {
namespace {

// Entries are drawn column-major so the layout of the draw sequence is part
// of the format contract.
Matrix gaussian_matrix(CounterRng& rng, Index rows, Index cols) {
  Matrix M(rows, cols);
  for (Index j = 0; j < cols; ++j) {
    for (Index i = 0; i < rows; ++i) {
      M(i, j) = rng.next_normal();
    }
  }
  return M;
}

Matrix bernoulli_mask(CounterRng& rng, Index rows, Index cols, double gamma) {
  Matrix M(rows, cols);
  for (Index j = 0; j < cols; ++j) {
    for (Index i = 0; i < rows; ++i) {
      M(i, j) = rng.next_unit() < gamma ? 1.0 : 0.0;
    }
  }
  return M;
}

}  // namespace

RsrInstance gen_rsr(const RsrParams& params) {
  if (params.n < 2 || params.d < 1 || params.d >= params.n ||
      params.d >= params.p1 || params.p2 < 0) {
    throw DegenerateInput("gen_rsr: need n ≥ 2, 1 ≤ d < min(n, p1), p2 ≥ 0");
  }
  CounterRng rng(params.seed);
  const Matrix G = gaussian_matrix(rng, params.n, params.d);
  const Matrix Q = qr_positive(G).Q;
  const Matrix C = gaussian_matrix(rng, params.d, params.p1);
  RsrInstance inst;
  inst.Y.resize(params.n, params.p1 + params.p2);
  inst.Y.leftCols(params.p1) = Q * C;
  if (params.p2 > 0) {
    inst.Y.rightCols(params.p2) = gaussian_matrix(rng, params.n, params.p2);
  }
  for (Index j = 0; j < inst.Y.cols(); ++j) {
    const double norm = inst.Y.col(j).norm();
    if (norm == 0.0) {
      throw DegenerateInput("gen_rsr: drew an exactly-zero column");
    }
    inst.Y.col(j) /= norm;
  }
  inst.S = SubspaceBasis::make(Q);
  inst.params = params;
  return inst;
}

OdlInstance gen_odl(const OdlParams& params) {
  if (params.n < 2 || params.p < 1 || !(params.gamma > 0.0 && params.gamma < 1.0)) {
    throw DegenerateInput("gen_odl: need n ≥ 2, p ≥ 1, gamma in (0,1)");
  }
  CounterRng rng(params.seed);
  const Matrix G = gaussian_matrix(rng, params.n, params.n);
  const Matrix D = qr_positive(G).Q;
  const Matrix mask = bernoulli_mask(rng, params.n, params.p, params.gamma);
  const Matrix coeff = gaussian_matrix(rng, params.n, params.p);
  OdlInstance inst;
  inst.A = mask.cwiseProduct(coeff);
  inst.Y = D * inst.A;
  inst.dictionary = StiefelPoint::make(D);
  inst.params = params;
  return inst;
}

Vector spectral_init(const Matrix& Y) {
  validate_data_matrix(Y, "spectral_init");
  const Matrix cov = Y * Y.transpose();
  return project_sphere(smallest_eigvecs(cov, 1).col(0));
}

void save_instance(const std::filesystem::path& dir, const RsrInstance& inst) {
  std::filesystem::create_directories(dir);
  write_matrix_csv(dir / "Y.csv", inst.Y);
  write_matrix_csv(dir / "truth.csv", inst.S.m);
  nlohmann::json meta;
  meta["model"] = "rsr";
  meta["n"] = inst.params.n;
  meta["d"] = inst.params.d;
  meta["p1"] = inst.params.p1;
  meta["p2"] = inst.params.p2;
  meta["seed"] = inst.params.seed;
  meta["generator_name"] = kGeneratorName;
  meta["normalized_columns"] = true;
  write_text_file(dir / "meta.json", meta.dump(2) + "\n");
}

void save_instance(const std::filesystem::path& dir, const OdlInstance& inst) {
  std::filesystem::create_directories(dir);
  write_matrix_csv(dir / "Y.csv", inst.Y);
  write_matrix_csv(dir / "truth.csv", inst.dictionary.m);
  nlohmann::json meta;
  meta["model"] = "odl";
  meta["n"] = inst.params.n;
  meta["p"] = inst.params.p;
  meta["gamma"] = inst.params.gamma;
  meta["seed"] = inst.params.seed;
  meta["generator_name"] = kGeneratorName;
  meta["normalized_columns"] = false;
  write_text_file(dir / "meta.json", meta.dump(2) + "\n");
}

Instance load_instance(const std::filesystem::path& dir) {
  Instance inst;
  inst.Y = read_matrix_csv(dir / "Y.csv");
  validate_data_matrix(inst.Y, "load_instance");
  inst.truth = read_matrix_csv(dir / "truth.csv");
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(read_text_file(dir / "meta.json"));
  } catch (const nlohmann::json::exception& e) {
    throw IoError("load_instance: bad meta.json in " + dir.string() + ": " + e.what());
  }
  inst.meta.model = meta.at("model").get<std::string>();
  inst.meta.n = meta.at("n").get<Index>();
  inst.meta.seed = meta.at("seed").get<std::uint64_t>();
  inst.meta.generator = meta.value("generator_name", std::string());
  inst.meta.normalized_columns = meta.value("normalized_columns", false);
  if (inst.meta.model == "rsr") {
    inst.meta.d = meta.at("d").get<Index>();
    inst.meta.p1 = meta.at("p1").get<Index>();
    inst.meta.p2 = meta.at("p2").get<Index>();
  } else if (inst.meta.model == "odl") {
    inst.meta.p = meta.at("p").get<Index>();
    inst.meta.gamma = meta.at("gamma").get<double>();
  } else {
    throw IoError("load_instance: unknown model '" + inst.meta.model + "'");
  }
  return inst;
}

Instance generate_instance(const InstanceMeta& meta) {
  Instance inst;
  if (meta.model == "rsr") {
    RsrInstance r = gen_rsr({meta.n, meta.d, meta.p1, meta.p2, meta.seed});
    inst.Y = std::move(r.Y);
    inst.truth = std::move(r.S.m);
    inst.meta = meta;
    inst.meta.generator = kGeneratorName;
    inst.meta.normalized_columns = true;
  } else if (meta.model == "odl") {
    OdlInstance o = gen_odl({meta.n, meta.p, meta.gamma, meta.seed});
    inst.Y = std::move(o.Y);
    inst.truth = std::move(o.dictionary.m);
    inst.meta = meta;
    inst.meta.generator = kGeneratorName;
    inst.meta.normalized_columns = false;
  } else {
    throw DegenerateInput("generate_instance: unknown model '" + meta.model + "'");
  }
  return inst;
}

}  // namespace manppa
