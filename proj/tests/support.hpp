#pragma once

// Shared helpers for the unit tests: random matrices drawn from the library's
// portable generator so failures reproduce.

#include "hessnet/linalg.hpp"
#include "hessnet/oracle.hpp"

namespace hessnet::test {

inline Matrix random_matrix(std::size_t rows, std::size_t cols, Lcg& rng) {
  Matrix m(rows, cols);
  for (double& v : m.data()) v = rng.uniform(-1.0, 1.0);
  return m;
}

inline Matrix random_symmetric(std::size_t n, Lcg& rng) {
  const Matrix a = random_matrix(n, n, rng);
  return scale(add(a, a.transpose()), 0.5);
}

inline Vector random_vector(std::size_t n, Lcg& rng) {
  Vector v(n);
  for (double& x : v) x = rng.uniform(-1.0, 1.0);
  return v;
}

}  // namespace hessnet::test
