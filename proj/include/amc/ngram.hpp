#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <istream>
#include <limits>
#include <map>
#include <memory>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "amc/distribution.hpp"
#include "amc/errors.hpp"
#include "amc/provider.hpp"
#include "amc/tokens.hpp"

namespace amc {

/// Additive-smoothed n-gram model without backoff:
///   P(w | h) = (c(h, w) + alpha) / (c(h) + alpha * |V|)
/// where h is the last (order - 1) tokens, padded on the left with a
/// begin-of-sequence marker. Each corpus line is one sequence terminated by
/// the end-of-sequence token.
class NgramProvider final : public Provider {
 public:
  static constexpr int kMaxOrder = 5;

  static std::shared_ptr<NgramProvider> train(std::istream& corpus, int order, double alpha) {
    if (order < 1 || order > kMaxOrder) {
      throw ConfigError("n-gram order must lie in [1, 5], got " + std::to_string(order));
    }
    if (!(alpha > 0.0)) throw ConfigError("smoothing constant alpha must be positive");

    std::vector<TokenSequence> lines;
    std::set<std::string> words;
    std::string line;
    while (std::getline(corpus, line)) {
      auto seq = tokenize(line);
      if (seq.empty()) continue;
      for (const auto& w : seq.words) words.insert(w);
      lines.push_back(std::move(seq));
    }
    if (lines.empty()) throw ConfigError("corpus is empty after tokenization");

    auto p = std::shared_ptr<NgramProvider>(new NgramProvider(order, alpha));
    for (const auto& w : words) p->vocab_.add(w);  // std::set order keeps ids reproducible

    for (const auto& seq : lines) {
      std::vector<TokenId> ids;
      ids.reserve(seq.size() + 1);
      for (const auto& w : seq.words) ids.push_back(p->vocab_.id(w));
      ids.push_back(Vocabulary::kEos);
      for (std::size_t pos = 0; pos < ids.size(); ++pos) {
        auto& row = p->counts_[p->history(ids, pos)];
        row.total += 1;
        row.next[ids[pos]] += 1;
      }
    }
    p->tokens_seen_ = 0;
    for (const auto& seq : lines) p->tokens_seen_ += seq.size() + 1;
    return p;
  }

  static std::shared_ptr<NgramProvider> train(const std::string& corpus_text, int order,
                                              double alpha) {
    std::istringstream in(corpus_text);
    return train(in, order, alpha);
  }

  std::string kind() const override { return "ngram"; }

  PrefixDistribution next_distribution(const TokenSequence& prefix) const override {
    if (prefix.empty()) throw ConfigError("next_distribution needs a non-empty prefix");
    std::vector<TokenId> ids(prefix.size());
    for (std::size_t pos = 0; pos < prefix.size(); ++pos)
      ids[pos] = vocab_.id(prefix.words[pos], pos);
    auto d = distribution_for(history(ids, ids.size()));
    d.prefix_len = prefix.size();
    return d;
  }

  std::optional<PrefixDistribution> unconditional_distribution() const override {
    auto d = distribution_for(history({}, 0));
    d.prefix_len = 0;
    return d;
  }

  // Lowercased whitespace split, same as training.
  TokenSequence tokenize_text(std::string_view text) const override { return tokenize(text); }

  std::optional<TokenId> token_id(std::string_view token) const override {
    return vocab_.find(token);
  }
  std::string token_text(TokenId id) const override { return vocab_.token(id); }
  std::size_t vocab_size() const override { return vocab_.size(); }

  nlohmann::json describe() const override {
    nlohmann::json j = {{"kind", "ngram"}, {"order", order_}, {"alpha", alpha_}};
    if (!corpus_path_.empty()) j["corpus"] = corpus_path_;
    return j;
  }

  int order() const noexcept { return order_; }
  double alpha() const noexcept { return alpha_; }
  const Vocabulary& vocabulary() const noexcept { return vocab_; }
  std::size_t context_count() const noexcept { return counts_.size(); }
  std::size_t tokens_seen() const noexcept { return tokens_seen_; }
  void set_corpus_path(std::string path) { corpus_path_ = std::move(path); }

  /// Observed continuation counts, for dumping a trained model.
  nlohmann::json counts_json() const {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& [hist, row] : counts_) {
      nlohmann::json h = nlohmann::json::array();
      for (TokenId t : hist) {
        if (t == kBos) {
          h.push_back("<s>");
        } else {
          h.push_back(vocab_.token(t));
        }
      }
      nlohmann::json next = nlohmann::json::object();
      for (const auto& [id, c] : row.next) next[vocab_.token(id)] = c;
      out.push_back({{"history", h}, {"total", row.total}, {"next", next}});
    }
    return out;
  }

 private:
  static constexpr TokenId kBos = std::numeric_limits<TokenId>::max();

  struct Row {
    std::uint64_t total = 0;
    std::map<TokenId, std::uint64_t> next;
  };

  NgramProvider(int order, double alpha) : order_(order), alpha_(alpha) {}

  // History preceding position `pos` of `ids`.
  std::vector<TokenId> history(const std::vector<TokenId>& ids, std::size_t pos) const {
    const std::size_t len = static_cast<std::size_t>(order_ - 1);
    std::vector<TokenId> h(len, kBos);
    for (std::size_t k = 0; k < len && k < pos; ++k) h[len - 1 - k] = ids[pos - 1 - k];
    return h;
  }

  PrefixDistribution distribution_for(const std::vector<TokenId>& hist) const {
    const std::size_t v = vocab_.size();
    PrefixDistribution d;
    d.dense = true;
    const auto it = counts_.find(hist);
    const double total = it == counts_.end() ? 0.0 : static_cast<double>(it->second.total);
    const double denom = total + alpha_ * static_cast<double>(v);
    d.probs.assign(v, alpha_ / denom);
    if (it != counts_.end()) {
      for (const auto& [id, c] : it->second.next)
        d.probs[id] = (static_cast<double>(c) + alpha_) / denom;
    }
    return d;
  }

  int order_;
  double alpha_;
  Vocabulary vocab_;
  std::map<std::vector<TokenId>, Row> counts_;
  std::size_t tokens_seen_ = 0;
  std::string corpus_path_;
};

}  // namespace amc
