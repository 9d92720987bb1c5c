#include "manppa/eigensolver.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace manppa {

EigenDecomposition jacobi_eigen_sym(const Matrix& A) {
  validate_data_matrix(A, "jacobi_eigen_sym");
  if (A.rows() != A.cols()) {
    throw DegenerateInput("jacobi_eigen_sym: matrix not square");
  }
  const Index n = A.rows();
  const double scale = std::max(1.0, A.cwiseAbs().maxCoeff());
  const double asym = (A - A.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-10 * scale) {
    throw DegenerateInput("jacobi_eigen_sym: matrix not symmetric, |A - Aᵀ| = " +
                          std::to_string(asym));
  }

  Matrix B = 0.5 * (A + A.transpose());
  Matrix V = Matrix::Identity(n, n);

  // Cyclic sweeps over the strict upper triangle until the off-diagonal mass
  // is negligible relative to the matrix scale.
  const double tol = 1e-15 * std::max(1.0, B.norm());
  const int max_sweeps = 64;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double off = 0.0;
    for (Index p = 0; p + 1 < n; ++p) {
      for (Index q = p + 1; q < n; ++q) {
        off += B(p, q) * B(p, q);
      }
    }
    if (std::sqrt(2.0 * off) <= tol) break;

    for (Index p = 0; p + 1 < n; ++p) {
      for (Index q = p + 1; q < n; ++q) {
        const double apq = B(p, q);
        if (apq == 0.0) continue;
        const double tau = (B(q, q) - B(p, p)) / (2.0 * apq);
        const double t = (tau >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(tau) + std::sqrt(1.0 + tau * tau));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = t * c;
        // B <- JᵀBJ with the Givens rotation J acting on columns p, q.
        for (Index k = 0; k < n; ++k) {
          const double bkp = B(k, p);
          const double bkq = B(k, q);
          B(k, p) = c * bkp - s * bkq;
          B(k, q) = s * bkp + c * bkq;
        }
        for (Index k = 0; k < n; ++k) {
          const double bpk = B(p, k);
          const double bqk = B(q, k);
          B(p, k) = c * bpk - s * bqk;
          B(q, k) = s * bpk + c * bqk;
        }
        for (Index k = 0; k < n; ++k) {
          const double vkp = V(k, p);
          const double vkq = V(k, q);
          V(k, p) = c * vkp - s * vkq;
          V(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }

  // Sort ascending; ties keep the lower original index first.
  std::vector<Index> order(static_cast<size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Index a, Index b) { return B(a, a) < B(b, b); });

  EigenDecomposition out;
  out.values.resize(n);
  out.vectors.resize(n, n);
  for (Index i = 0; i < n; ++i) {
    const Index src = order[static_cast<size_t>(i)];
    out.values[i] = B(src, src);
    out.vectors.col(i) = V.col(src);
    // Sign convention: the entry of largest magnitude is positive.
    Index arg = 0;
    double best = -1.0;
    for (Index k = 0; k < n; ++k) {
      const double a = std::abs(out.vectors(k, i));
      if (a > best) {
        best = a;
        arg = k;
      }
    }
    if (out.vectors(arg, i) < 0.0) out.vectors.col(i) = -out.vectors.col(i);
  }
  return out;
}

Matrix smallest_eigvecs(const Matrix& A, Index q) {
  if (q < 1 || q > A.rows()) {
    throw DegenerateInput("smallest_eigvecs: q out of range");
  }
  return jacobi_eigen_sym(A).vectors.leftCols(q);
}

}  // namespace manppa
