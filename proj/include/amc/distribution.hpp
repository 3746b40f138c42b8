#pragma once

#include <cmath>
#include <cstddef>
#include <numeric>
#include <string>
#include <vector>

#include "amc/errors.hpp"
#include "amc/tokens.hpp"

namespace amc {

inline constexpr double kDistributionTolerance = 1e-6;

/// Next-token distribution after the prefix x_1..x_{prefix_len}.
///
/// `probs` is indexed by the provider's token ids. A dense distribution covers
/// the whole vocabulary. A sparse one lists some tokens (the rest of `probs`
/// is zero) and keeps the unlisted mass in `tail_mass`.
struct PrefixDistribution {
  std::vector<double> probs;
  double tail_mass = 0.0;
  bool dense = true;
  std::size_t prefix_len = 0;

  double prob(TokenId id) const noexcept { return id < probs.size() ? probs[id] : 0.0; }

  bool covers(TokenId id) const noexcept { return !dense || id < probs.size(); }

  double total_mass() const noexcept {
    return std::accumulate(probs.begin(), probs.end(), 0.0) + tail_mass;
  }

  void validate(double tolerance = kDistributionTolerance) const {
    for (std::size_t i = 0; i < probs.size(); ++i) {
      if (!(probs[i] >= 0.0)) {
        throw InvariantError("distribution entry " + std::to_string(i) + " is negative or NaN");
      }
    }
    if (!(tail_mass >= 0.0)) throw InvariantError("tail mass is negative or NaN");
    const double total = total_mass();
    if (std::abs(total - 1.0) > tolerance) {
      throw InvariantError("distribution for prefix length " + std::to_string(prefix_len) +
                           " has total mass " + std::to_string(total));
    }
  }
};

// Rank of `id` among the listed entries, 1 = most likely. Ties resolve toward
// the lower id, matching the decoder's argmax.
inline std::size_t rank_of(const std::vector<double>& probs, TokenId id) {
  const double p = id < probs.size() ? probs[id] : 0.0;
  std::size_t rank = 1;
  for (std::size_t j = 0; j < probs.size(); ++j) {
    if (probs[j] > p || (probs[j] == p && j < id)) ++rank;
  }
  return rank;
}

inline TokenId argmax(const std::vector<double>& probs) {
  TokenId best = 0;
  for (std::size_t j = 1; j < probs.size(); ++j)
    if (probs[j] > probs[best]) best = static_cast<TokenId>(j);
  return best;
}

inline double entropy(const std::vector<double>& probs) {
  double h = 0.0;
  for (double p : probs)
    if (p > 0.0) h -= p * std::log(p);
  return h;
}

}  // namespace amc
