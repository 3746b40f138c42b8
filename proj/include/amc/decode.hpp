#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "amc/chain.hpp"
#include "amc/distribution.hpp"
#include "amc/errors.hpp"
#include "amc/provider.hpp"
#include "amc/tokens.hpp"
#include "amc/transition.hpp"

namespace amc {

inline constexpr double kAdjustedTolerance = 1e-9;
inline constexpr double kDefaultLambda = 0.1;

struct AdjustedDistribution {
  std::vector<double> probs;
  double tail_mass = 0.0;
  double lambda = 0.0;
  std::vector<double> weights;  // normalized loss weights, one per d_list entry

  double prob(TokenId id) const noexcept { return id < probs.size() ? probs[id] : 0.0; }
  double total_mass() const noexcept {
    return std::accumulate(probs.begin(), probs.end(), 0.0) + tail_mass;
  }
};

/// D~ = (D_t + lambda * sum_i w_i D_i) / (1 + lambda), w_i = L_i / sum_k L_k.
///
/// The loss weights are normalized across prefixes, and the sum is divided
/// by 1 + lambda so the result is a distribution. With no positive loss, or
/// lambda == 0, D_t is returned unchanged.
inline AdjustedDistribution adjusted_distribution(std::span<const PrefixDistribution> d_list,
                                                  const PrefixDistribution& d_t,
                                                  std::span<const double> losses, double lambda) {
  if (d_list.size() != losses.size()) {
    throw InvariantError("got " + std::to_string(d_list.size()) + " prefix distributions for " +
                         std::to_string(losses.size()) + " losses");
  }
  if (!(lambda >= 0.0)) throw ConfigError("lambda must be non-negative");

  AdjustedDistribution out;
  out.lambda = lambda;
  out.weights.assign(losses.size(), 0.0);
  double loss_sum = 0.0;
  for (double l : losses) {
    if (!(l >= 0.0)) throw InvariantError("information loss must be non-negative");
    loss_sum += l;
  }
  if (loss_sum > 0.0) {
    for (std::size_t i = 0; i < losses.size(); ++i) out.weights[i] = losses[i] / loss_sum;
  }

  if (lambda == 0.0 || loss_sum == 0.0) {
    out.probs = d_t.probs;
    out.tail_mass = d_t.tail_mass;
    return out;
  }

  std::size_t width = d_t.probs.size();
  for (std::size_t i = 0; i < d_list.size(); ++i)
    if (out.weights[i] > 0.0) width = std::max(width, d_list[i].probs.size());

  out.probs.assign(width, 0.0);
  std::copy(d_t.probs.begin(), d_t.probs.end(), out.probs.begin());
  double tail = d_t.tail_mass;
  for (std::size_t i = 0; i < d_list.size(); ++i) {
    const double w = lambda * out.weights[i];
    if (w == 0.0) continue;
    const auto& src = d_list[i].probs;
    for (std::size_t k = 0; k < src.size(); ++k) out.probs[k] += w * src[k];
    tail += w * d_list[i].tail_mass;
  }
  const double norm = 1.0 + lambda;
  for (auto& p : out.probs) p /= norm;
  out.tail_mass = tail / norm;
  return out;
}

/// Pairs each context prefix with its loss and applies the adjustment.
///
/// By default prefix i (i = 1..n-1) is weighted by L_info(i); the last
/// prefix is D_t itself. With `include_unconditional`, the empty prefix joins
/// the sum and every distribution is weighted by the loss of the token it
/// predicts: D(i-1) <-> L_info(i), i = 1..n.
struct AdjustOptions {
  double lambda = kDefaultLambda;
  bool include_unconditional = false;
};

inline AdjustedDistribution adjust_for_context(const Provider& provider,
                                               const ContextAnalysis& analysis,
                                               const AdjustOptions& opts) {
  const auto& dists = analysis.dists;
  const auto& losses = analysis.profile.losses;
  const std::size_t n = dists.size();
  const PrefixDistribution& d_t = dists.back();
  if (!opts.include_unconditional) {
    return adjusted_distribution(std::span(dists).first(n - 1), d_t,
                                 std::span(losses).first(n - 1), opts.lambda);
  }
  auto d0 = provider.unconditional_distribution();
  if (!d0) throw ConfigError(provider.kind() + " provider has no unconditional distribution");
  std::vector<PrefixDistribution> d_list;
  d_list.reserve(n);
  d_list.push_back(std::move(*d0));
  d_list.insert(d_list.end(), dists.begin(), dists.end() - 1);
  return adjusted_distribution(d_list, d_t, losses, opts.lambda);
}

enum class DecodeMode { kBaseline, kAmc };

inline DecodeMode parse_decode_mode(const std::string& s) {
  if (s == "baseline") return DecodeMode::kBaseline;
  if (s == "amc") return DecodeMode::kAmc;
  throw ConfigError("unknown mode '" + s + "'");
}

inline std::string to_string(DecodeMode m) { return m == DecodeMode::kAmc ? "amc" : "baseline"; }

struct DistributionDigest {
  std::vector<std::pair<std::string, double>> top;
  double entropy = 0.0;
};

inline DistributionDigest digest(const Provider& provider, const std::vector<double>& probs,
                                 std::size_t k = 5) {
  std::vector<TokenId> order(probs.size());
  std::iota(order.begin(), order.end(), TokenId{0});
  const std::size_t keep = std::min(k, order.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(keep), order.end(),
                    [&](TokenId a, TokenId b) {
                      return probs[a] > probs[b] || (probs[a] == probs[b] && a < b);
                    });
  DistributionDigest out;
  for (std::size_t i = 0; i < keep; ++i)
    out.top.emplace_back(provider.token_text(order[i]), probs[order[i]]);
  out.entropy = entropy(probs);
  return out;
}

struct GenerationStep {
  TokenId token = 0;
  std::string text;
  DistributionDigest baseline;
  std::optional<DistributionDigest> adjusted;
  std::optional<InfoProfile> profile;
};

struct GenerationTrace {
  DecodeMode mode = DecodeMode::kBaseline;
  TokenSequence prompt;
  std::vector<GenerationStep> steps;

  /// Emitted tokens, without a trailing end-of-sequence marker.
  TokenSequence output() const {
    TokenSequence out;
    for (const auto& s : steps)
      if (s.text != kEosToken) out.words.push_back(s.text);
    return out;
  }
};

/// Raised when the provider fails mid-generation; carries what was emitted.
class GenerationAborted : public ProviderError {
 public:
  GenerationAborted(const std::string& what, GenerationTrace partial)
      : ProviderError(what), partial_(std::move(partial)) {}
  const GenerationTrace& partial() const noexcept { return partial_; }

 private:
  GenerationTrace partial_;
};

struct DecodeOptions {
  DecodeMode mode = DecodeMode::kAmc;
  AdjustOptions adjust;
  AnalysisOptions analysis{.policy = {}, .score_cap = kDefaultScoreCap, .keep_matrices = false};
};

struct StepResult {
  PrefixDistribution baseline;
  std::optional<AdjustedDistribution> adjusted;
  std::optional<InfoProfile> profile;

  const std::vector<double>& probs() const { return adjusted ? adjusted->probs : baseline.probs; }
};

/// One decoding step on `context`. Baseline mode never builds the chain.
inline StepResult decode_step(const Provider& provider, const TokenSequence& context,
                              const DecodeOptions& opts) {
  StepResult out;
  if (opts.mode == DecodeMode::kBaseline) {
    out.baseline = provider.next_distribution(context);
    return out;
  }
  auto analysis = analyze_context(provider, context, opts.analysis);
  out.adjusted = adjust_for_context(provider, analysis, opts.adjust);
  out.profile = analysis.profile;
  out.baseline = std::move(analysis.dists.back());
  return out;
}

/// Greedy decoding, optionally under the information-loss adjustment.
/// Stops after `max_tokens` or once end-of-sequence is emitted.
inline GenerationTrace generate(const Provider& provider, const TokenSequence& prompt,
                                std::size_t max_tokens, const DecodeOptions& opts = {}) {
  if (prompt.empty()) throw ConfigError("prompt must not be empty");
  if (max_tokens == 0) throw ConfigError("max_tokens must be >= 1");

  GenerationTrace trace;
  trace.mode = opts.mode;
  trace.prompt = prompt;
  TokenSequence context = prompt;
  const TokenId eos = provider.eos_id();

  for (std::size_t step = 0; step < max_tokens; ++step) {
    StepResult r;
    try {
      r = decode_step(provider, context, opts);
    } catch (const ProviderError& e) {
      throw GenerationAborted(std::string("generation aborted at step ") + std::to_string(step) +
                                  ": " + e.what(),
                              trace);
    }
    GenerationStep s;
    s.token = argmax(r.probs());
    s.text = provider.token_text(s.token);
    s.baseline = digest(provider, r.baseline.probs);
    if (r.adjusted) s.adjusted = digest(provider, r.adjusted->probs);
    s.profile = std::move(r.profile);
    trace.steps.push_back(std::move(s));
    if (trace.steps.back().token == eos) break;
    context.words.push_back(trace.steps.back().text);
  }
  return trace;
}

struct ContinuationScore {
  double logprob = 0.0;     // nats, summed over continuation tokens
  std::size_t tokens = 0;
  std::size_t clamped = 0;  // tokens with zero probability, scored as -score_cap

  double mean_logprob() const { return tokens ? logprob / static_cast<double>(tokens) : 0.0; }
};

/// Sum of log D~(next token) over the continuation, recomputing the chain on
/// the growing prompt + partial continuation.
inline ContinuationScore score_continuation(const Provider& provider, const TokenSequence& prompt,
                                            const TokenSequence& continuation,
                                            const DecodeOptions& opts = {}) {
  if (prompt.empty() || continuation.empty()) {
    throw ConfigError("prompt and continuation must be non-empty");
  }
  ContinuationScore out;
  TokenSequence context = prompt;
  for (const auto& word : continuation.words) {
    const auto r = decode_step(provider, context, opts);
    const auto id = provider.token_id(word);
    const double p = id ? (r.adjusted ? r.adjusted->prob(*id) : r.baseline.prob(*id)) : 0.0;
    if (p > 0.0) {
      out.logprob += std::log(p);
    } else {
      out.logprob -= opts.analysis.score_cap;
      ++out.clamped;
    }
    ++out.tokens;
    context.words.push_back(word);
  }
  return out;
}

inline nlohmann::json to_json(const DistributionDigest& d) {
  nlohmann::json top = nlohmann::json::array();
  for (const auto& [tok, p] : d.top) top.push_back({{"token", tok}, {"prob", p}});
  return {{"top", top}, {"entropy", d.entropy}};
}

inline nlohmann::json to_json(const GenerationTrace& t) {
  nlohmann::json steps = nlohmann::json::array();
  for (const auto& s : t.steps) {
    nlohmann::json j = {
        {"token", s.text}, {"token_id", s.token}, {"baseline", to_json(s.baseline)}};
    if (s.adjusted) j["adjusted"] = to_json(*s.adjusted);
    if (s.profile) j["profile"] = {{"scores", s.profile->scores}, {"losses", s.profile->losses}};
    steps.push_back(std::move(j));
  }
  return {{"mode", to_string(t.mode)},
          {"prompt", t.prompt.words},
          {"output", t.output().words},
          {"steps", steps}};
}

}  // namespace amc
