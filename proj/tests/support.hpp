// Seeded sampling helpers shared by the test binaries.
#pragma once

#include <manppa/geometry.hpp>
#include <manppa/rng.hpp>
#include <manppa/types.hpp>

namespace testsup {

using manppa::CounterRng;
using manppa::Index;
using manppa::Matrix;
using manppa::Vector;

inline Vector random_vector(CounterRng& rng, Index n) {
  Vector v(n);
  for (Index i = 0; i < n; ++i) v(i) = rng.next_normal();
  return v;
}

inline Vector random_unit(CounterRng& rng, Index n) {
  return manppa::project_sphere(random_vector(rng, n));
}

inline Matrix random_matrix(CounterRng& rng, Index n, Index p) {
  Matrix M(n, p);
  for (Index j = 0; j < p; ++j) M.col(j) = random_vector(rng, n);
  return M;
}

inline Vector random_tangent(CounterRng& rng, const Vector& x, double scale) {
  return scale * manppa::tangent_project(x, random_vector(rng, x.size()));
}

}  // namespace testsup
