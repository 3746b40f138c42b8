#pragma once

// Shared test fixtures and independent oracles.

#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

#include "amc/chain.hpp"
#include "amc/matrix.hpp"

namespace amc::testing {

// The three-token chain used throughout: P rows
//   [0.2, 0.5, 0.3]
//   [0.0, 0.4, 0.6]
//   [0.0, 0.0, 1.0]
inline Matrix abc_p() {
  return {{0.2, 0.5, 0.3}, {0.0, 0.4, 0.6}, {0.0, 0.0, 1.0}};
}

// Random row-stochastic upper-triangular P of size n. Rows draw from a
// Dirichlet(1, ..., 1) over columns i..n-1.
inline Matrix random_upper_stochastic(std::size_t n, std::mt19937_64& rng) {
  std::exponential_distribution<double> expo(1.0);
  Matrix p(n);
  for (std::size_t i = 0; i < n; ++i) {
    double sum = 0.0;
    for (std::size_t j = i; j < n; ++j) sum += (p(i, j) = expo(rng));
    double acc = 0.0;
    for (std::size_t j = i + 1; j < n; ++j) acc += (p(i, j) /= sum);
    p(i, i) = 1.0 - acc;
  }
  return p;
}

// N = I + Q + Q^2 + ... ; the series terminates because Q is nilpotent.
inline Matrix series_fundamental(const Matrix& q) {
  const std::size_t n = q.size();
  Matrix sum = Matrix::identity(n);
  Matrix term = Matrix::identity(n);
  for (std::size_t k = 1; k < n; ++k) {
    term = multiply(term, q);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) sum(i, j) += term(i, j);
  }
  return sum;
}

inline Matrix identity_minus(const Matrix& q) {
  Matrix m = Matrix::identity(q.size());
  for (std::size_t i = 0; i < q.size(); ++i)
    for (std::size_t j = 0; j < q.size(); ++j) m(i, j) -= q(i, j);
  return m;
}

}  // namespace amc::testing
