#pragma once

// Random-walk estimate of the visitation matrix. Verification only: it shares
// nothing with the substitution code in chain.hpp beyond the input type.

#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

#include "amc/chain.hpp"
#include "amc/matrix.hpp"

namespace amc {

template <typename Engine = std::mt19937_64>
Matrix mc_visitation_oracle(const AbsorbingDecomposition& d, std::size_t walks,
                            std::uint64_t seed) {
  if (walks == 0) throw ConfigError("walks must be >= 1");
  const std::size_t n = d.size();
  const std::size_t absorbing = n;

  // Cumulative [Q | R] rows; index n is the absorbing state.
  std::vector<std::vector<double>> cdf(n, std::vector<double>(n + 1));
  for (std::size_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      acc += d.q()(i, j);
      cdf[i][j] = acc;
    }
    cdf[i][n] = acc + d.r()[i];
  }

  Engine rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Matrix hits(n);
  std::vector<std::size_t> stamp(n, 0);
  std::size_t walk_id = 0;

  for (std::size_t start = 0; start < n; ++start) {
    auto hit_row = hits.row(start);
    for (std::size_t w = 0; w < walks; ++w) {
      ++walk_id;
      std::size_t state = start;
      while (state != absorbing) {
        if (stamp[state] != walk_id) {
          stamp[state] = walk_id;
          hit_row[state] += 1.0;
        }
        const auto& row = cdf[state];
        const double u = unit(rng) * row[n];
        std::size_t next = state + 1;
        while (next < n && u >= row[next]) ++next;
        state = next;
      }
    }
    for (auto& x : hit_row) x /= static_cast<double>(walks);
  }
  return hits;
}

}  // namespace amc
