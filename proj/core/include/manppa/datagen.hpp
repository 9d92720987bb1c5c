#pragma once

#include "manppa/rng.hpp"
#include "manppa/types.hpp"

#include <filesystem>
#include <limits>
#include <string>

namespace manppa {

// Inlier/outlier subspace model: p1 unit columns spanning a random
// d-dimensional subspace plus p2 unit outlier columns.
struct RsrParams {
  Index n = 30;
  Index d = 29;
  Index p1 = 500;
  Index p2 = 1667;
  std::uint64_t seed = 1;
};

struct RsrInstance {
  Matrix Y;         // n×(p1+p2), every column unit norm; inliers first
  SubspaceBasis S;  // n×d inlier subspace basis
  RsrParams params;
};

// Draws S from the QR factor (positive-diagonal convention) of a Gaussian
// matrix, inlier coefficients and outliers from the same counter-based
// stream, and normalizes every column. Columns are not permuted.
RsrInstance gen_rsr(const RsrParams& params);

// Orthogonal dictionary model: Y = D·A with D a random rotation and A an
// entrywise Bernoulli(gamma)·Gaussian coefficient matrix. Columns keep their
// raw scale (no normalization).
struct OdlParams {
  Index n = 10;
  Index p = 317;
  double gamma = 0.1;
  std::uint64_t seed = 1;
};

struct OdlInstance {
  Matrix Y;                // n×p, unnormalized; Y = dictionary · A
  StiefelPoint dictionary; // n×n ground-truth rotation
  Matrix A;                // n×p Bernoulli-Gaussian coefficients
  OdlParams params;
};

OdlInstance gen_odl(const OdlParams& params);

// Eigenvector of Y·Yᵀ with the smallest eigenvalue: the standard initializer
// for the single-vector solvers.
Vector spectral_init(const Matrix& Y);

// On-disk instance layout: <dir>/Y.csv, <dir>/truth.csv (subspace basis or
// dictionary) and <dir>/meta.json (model, shape parameters, seed, generator
// name, column-normalization flag).
struct InstanceMeta {
  std::string model;  // "rsr" or "odl"
  Index n = 0;
  Index d = -1;
  Index p1 = -1;
  Index p2 = -1;
  Index p = -1;
  double gamma = std::numeric_limits<double>::quiet_NaN();
  std::uint64_t seed = 0;
  std::string generator;
  bool normalized_columns = false;
};

struct Instance {
  Matrix Y;
  Matrix truth;
  InstanceMeta meta;
};

void save_instance(const std::filesystem::path& dir, const RsrInstance& inst);
void save_instance(const std::filesystem::path& dir, const OdlInstance& inst);
Instance load_instance(const std::filesystem::path& dir);

// Rebuilds the instance described by meta (used to run grid cells without
// touching disk). Throws DegenerateInput for unknown models.
Instance generate_instance(const InstanceMeta& meta);

}  // namespace manppa
