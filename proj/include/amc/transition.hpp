#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "amc/chain.hpp"
#include "amc/distribution.hpp"
#include "amc/errors.hpp"
#include "amc/provider.hpp"
#include "amc/tokens.hpp"

namespace amc {

enum class DuplicatePolicy {
  kFullMass,   // every later occurrence of a token gets its full probability
  kSplitMass,  // the probability is shared equally among later occurrences
};

inline DuplicatePolicy parse_duplicate_policy(const std::string& s) {
  if (s == "full-mass") return DuplicatePolicy::kFullMass;
  if (s == "split-mass") return DuplicatePolicy::kSplitMass;
  throw ConfigError("unknown duplicate policy '" + s + "'");
}

inline std::string to_string(DuplicatePolicy p) {
  return p == DuplicatePolicy::kFullMass ? "full-mass" : "split-mass";
}

struct BuildPolicy {
  DuplicatePolicy duplicate_policy = DuplicatePolicy::kFullMass;
  double delta_abs = kDefaultDeltaAbs;
  bool scale_to_fit = true;

  void validate() const { check_delta_abs(delta_abs); }
};

/// p_ij (j > i) is the probability that the prefix ending at token i
/// predicts the surface token x_j; p_ii takes whatever is left.
/// `ids[j]` is x_j's id in the distributions' vocabulary, or nullopt when the
/// provider has never seen it (only allowed for sparse distributions).
inline ContextTransitionMatrix build_transition_matrix(
    std::span<const PrefixDistribution> dists, std::span<const std::optional<TokenId>> ids,
    const BuildPolicy& policy = {}) {
  policy.validate();
  const std::size_t n = ids.size();
  if (n == 0) throw ConfigError("context must contain at least one token");
  if (dists.size() != n) {
    throw InvariantError("got " + std::to_string(dists.size()) + " distributions for " +
                         std::to_string(n) + " tokens");
  }

  Matrix p(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& d = dists[i];
    if (d.prefix_len != i + 1) {
      throw InvariantError("distribution " + std::to_string(i) + " conditions on prefix length " +
                           std::to_string(d.prefix_len) + ", expected " + std::to_string(i + 1));
    }

    std::map<TokenId, std::size_t> later_count;
    if (policy.duplicate_policy == DuplicatePolicy::kSplitMass) {
      for (std::size_t j = i + 1; j < n; ++j)
        if (ids[j]) ++later_count[*ids[j]];
    }

    double off = 0.0;
    for (std::size_t j = i + 1; j < n; ++j) {
      double x = 0.0;
      if (ids[j]) {
        if (!d.covers(*ids[j])) {
          throw InvariantError("token at position " + std::to_string(j) +
                               " is outside the dense distribution for prefix length " +
                               std::to_string(i + 1));
        }
        x = d.prob(*ids[j]);
        if (policy.duplicate_policy == DuplicatePolicy::kSplitMass)
          x /= static_cast<double>(later_count[*ids[j]]);
      } else if (d.dense) {
        throw InvariantError("token at position " + std::to_string(j) +
                             " is unknown to a dense distribution");
      }
      p(i, j) = x;
      off += x;
    }

    if (off > 1.0 - policy.delta_abs) {
      if (!policy.scale_to_fit) {
        throw InvariantError("row " + std::to_string(i) + " overflows: off-diagonal mass " +
                             std::to_string(off));
      }
      const double scale = (1.0 - policy.delta_abs) / off;
      off = 0.0;
      for (std::size_t j = i + 1; j < n; ++j) {
        p(i, j) *= scale;
        off += p(i, j);
      }
    }
    p(i, i) = 1.0 - off;
  }
  return ContextTransitionMatrix::create(std::move(p));
}

inline std::vector<std::optional<TokenId>> resolve_ids(const Provider& provider,
                                                       const TokenSequence& tokens) {
  std::vector<std::optional<TokenId>> ids(tokens.size());
  for (std::size_t j = 0; j < tokens.size(); ++j) ids[j] = provider.token_id(tokens.words[j]);
  return ids;
}

/// Everything computed while scoring a context. The matrices are only kept
/// when asked for; the decoding loop needs just the profile.
struct ContextAnalysis {
  TokenSequence tokens;
  std::vector<PrefixDistribution> dists;
  InfoProfile profile;
  std::optional<ContextTransitionMatrix> p;
  std::optional<FundamentalMatrix> n_mat;
  std::optional<VisitationMatrix> v;
};

struct AnalysisOptions {
  BuildPolicy policy;
  double score_cap = kDefaultScoreCap;
  bool keep_matrices = true;
};

inline ContextAnalysis analyze_distributions(const TokenSequence& tokens,
                                             std::vector<PrefixDistribution> dists,
                                             std::span<const std::optional<TokenId>> ids,
                                             const AnalysisOptions& opts = {}) {
  ContextAnalysis out;
  out.tokens = tokens;
  auto p = build_transition_matrix(dists, ids, opts.policy);
  auto d = decompose(p, opts.policy.delta_abs);
  if (opts.keep_matrices) {
    auto n_mat = fundamental(d);
    auto v = visitation(n_mat);
    out.profile.score_cap = opts.score_cap;
    out.profile.scores = info_scores(v, opts.score_cap);
    out.profile.losses = info_loss(out.profile.scores, v);
    out.p = std::move(p);
    out.n_mat = std::move(n_mat);
    out.v = std::move(v);
  } else {
    out.profile = info_profile(d, opts.score_cap);
  }
  out.dists = std::move(dists);
  return out;
}

/// Provider -> P -> (Q, R) -> N -> V -> S, L_info.
inline ContextAnalysis analyze_context(const Provider& provider, const TokenSequence& tokens,
                                       const AnalysisOptions& opts = {}) {
  if (tokens.empty()) throw ConfigError("context must contain at least one token");
  auto dists = provider.batch_prefix_distributions(tokens);
  const auto ids = resolve_ids(provider, tokens);
  return analyze_distributions(tokens, std::move(dists), ids, opts);
}

}  // namespace amc
