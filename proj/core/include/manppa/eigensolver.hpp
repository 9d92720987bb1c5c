#pragma once

#include "manppa/types.hpp"

namespace manppa {

// Full symmetric eigendecomposition computed with cyclic Jacobi rotations.
// Eigenvalues are returned in ascending order; each eigenvector is scaled so
// its entry of largest magnitude (smallest index on ties) is positive, which
// makes the output deterministic and platform independent.
struct EigenDecomposition {
  Vector values;   // ascending
  Matrix vectors;  // column i pairs with values[i]
};

// Throws DegenerateInput when A is not symmetric within
// 1e-10 · max(1, max|A_ij|).
EigenDecomposition jacobi_eigen_sym(const Matrix& A);

// The q eigenvectors of A with the smallest eigenvalues, as an n×q matrix.
Matrix smallest_eigvecs(const Matrix& A, Index q);

}  // namespace manppa
