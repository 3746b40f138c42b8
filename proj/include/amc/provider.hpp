#pragma once

#include <cstddef>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "amc/distribution.hpp"
#include "amc/errors.hpp"
#include "amc/tokens.hpp"

namespace amc {

/// Source of next-token distributions, one per prefix.
class Provider {
 public:
  virtual ~Provider() = default;

  virtual std::string kind() const = 0;

  /// Distribution of x_{n+1} given x_1..x_n. Requires n >= 1.
  virtual PrefixDistribution next_distribution(const TokenSequence& prefix) const = 0;

  /// Element i (0-based) conditions on x_1..x_{i+1}. The default loops over
  /// next_distribution; backends that can amortize override it.
  virtual std::vector<PrefixDistribution> batch_prefix_distributions(
      const TokenSequence& tokens) const {
    if (tokens.empty()) throw ConfigError("batch_prefix_distributions needs at least one token");
    std::vector<PrefixDistribution> out;
    out.reserve(tokens.size());
    for (std::size_t len = 1; len <= tokens.size(); ++len) {
      try {
        out.push_back(next_distribution(tokens.prefix(len)));
      } catch (const ProviderError& e) {
        throw ProviderError("prefix length " + std::to_string(len) + ": " + e.what());
      }
    }
    return out;
  }

  /// Distribution for the empty prefix, when the backend defines one.
  virtual std::optional<PrefixDistribution> unconditional_distribution() const {
    return std::nullopt;
  }

  virtual std::optional<TokenId> token_id(std::string_view token) const = 0;
  virtual std::string token_text(TokenId id) const = 0;
  virtual std::size_t vocab_size() const = 0;

  /// False when calls from several threads must be serialized by the caller.
  virtual bool concurrency_safe() const { return true; }

  /// Self-describing configuration, embedded in reports.
  virtual nlohmann::json describe() const = 0;

  /// Splits user text the way this backend expects. Plain whitespace split
  /// unless overridden.
  virtual TokenSequence tokenize_text(std::string_view text) const { return tokenize(text, false); }

  TokenId eos_id() const { return token_id(kEosToken).value_or(Vocabulary::kEos); }
};

using ProviderPtr = std::shared_ptr<const Provider>;

/// Literal prefix -> distribution table. Used for fixtures and tests.
///
/// JSON form:
///   {"vocab": ["A", "B", ...],
///    "rows": [{"prefix": ["A"], "probs": {"B": 0.5}, "tail": 0.5}, ...],
///    "unconditional": {"probs": {...}, "tail": 0.0}}      (optional)
/// A row is dense when "tail" is absent and its listed mass is 1.
class TableProvider final : public Provider {
 public:
  struct Row {
    TokenSequence prefix;
    PrefixDistribution dist;
  };

  static std::shared_ptr<TableProvider> from_json(const nlohmann::json& j) {
    auto p = std::shared_ptr<TableProvider>(new TableProvider());
    try {
      for (const auto& t : j.at("vocab")) p->vocab_.add(t.get<std::string>());
      for (const auto& row : j.at("rows")) {
        TokenSequence prefix;
        for (const auto& t : row.at("prefix")) prefix.words.push_back(t.get<std::string>());
        if (prefix.empty()) throw ConfigError("table rows need a non-empty prefix");
        for (std::size_t pos = 0; pos < prefix.size(); ++pos) p->vocab_.id(prefix.words[pos], pos);
        auto dist = p->parse_dist(row, prefix.size());
        p->rows_.push_back({std::move(prefix), std::move(dist)});
      }
      if (j.contains("unconditional")) p->unconditional_ = p->parse_dist(j.at("unconditional"), 0);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("malformed table provider: ") + e.what());
    } catch (const InvariantError& e) {
      throw ConfigError(std::string("invalid table distribution: ") + e.what());
    } catch (const LookupError& e) {
      throw ConfigError(std::string("table prefix uses unknown token: ") + e.what());
    }
    p->source_ = j;
    return p;
  }

  std::string kind() const override { return "table"; }

  PrefixDistribution next_distribution(const TokenSequence& prefix) const override {
    if (prefix.empty()) throw ConfigError("next_distribution needs a non-empty prefix");
    for (std::size_t pos = 0; pos < prefix.size(); ++pos) vocab_.id(prefix.words[pos], pos);
    for (const auto& row : rows_)
      if (row.prefix == prefix) return row.dist;
    throw ProviderError("table has no row for prefix [" + prefix.text() + "]");
  }

  std::optional<PrefixDistribution> unconditional_distribution() const override {
    return unconditional_;
  }

  std::optional<TokenId> token_id(std::string_view token) const override {
    return vocab_.find(token);
  }
  std::string token_text(TokenId id) const override { return vocab_.token(id); }
  std::size_t vocab_size() const override { return vocab_.size(); }

  nlohmann::json describe() const override { return {{"kind", "table"}, {"table", source_}}; }

  const Vocabulary& vocabulary() const noexcept { return vocab_; }

 private:
  TableProvider() = default;

  PrefixDistribution parse_dist(const nlohmann::json& row, std::size_t prefix_len) {
    PrefixDistribution d;
    d.prefix_len = prefix_len;
    d.probs.assign(vocab_.size(), 0.0);
    for (const auto& [tok, prob] : row.at("probs").items()) {
      const auto id = vocab_.find(tok);
      if (!id) throw ConfigError("table distribution names unknown token '" + tok + "'");
      d.probs[*id] = prob.get<double>();
    }
    d.tail_mass = row.value("tail", 0.0);
    d.dense = !row.contains("tail");
    d.validate();
    return d;
  }

  Vocabulary vocab_;
  std::vector<Row> rows_;
  std::optional<PrefixDistribution> unconditional_;
  nlohmann::json source_;
};

/// Wraps a provider so that every call holds one mutex.
class SerializingProvider final : public Provider {
 public:
  explicit SerializingProvider(ProviderPtr inner) : inner_(std::move(inner)) {}

  std::string kind() const override { return inner_->kind(); }
  PrefixDistribution next_distribution(const TokenSequence& prefix) const override {
    std::lock_guard lock(mu_);
    return inner_->next_distribution(prefix);
  }
  std::vector<PrefixDistribution> batch_prefix_distributions(
      const TokenSequence& tokens) const override {
    std::lock_guard lock(mu_);
    return inner_->batch_prefix_distributions(tokens);
  }
  std::optional<PrefixDistribution> unconditional_distribution() const override {
    std::lock_guard lock(mu_);
    return inner_->unconditional_distribution();
  }
  std::optional<TokenId> token_id(std::string_view token) const override {
    std::lock_guard lock(mu_);
    return inner_->token_id(token);
  }
  std::string token_text(TokenId id) const override {
    std::lock_guard lock(mu_);
    return inner_->token_text(id);
  }
  std::size_t vocab_size() const override {
    std::lock_guard lock(mu_);
    return inner_->vocab_size();
  }
  TokenSequence tokenize_text(std::string_view text) const override {
    return inner_->tokenize_text(text);
  }
  nlohmann::json describe() const override { return inner_->describe(); }

 private:
  ProviderPtr inner_;
  mutable std::mutex mu_;
};

inline ProviderPtr make_concurrency_safe(ProviderPtr p) {
  if (p->concurrency_safe()) return p;
  return std::make_shared<SerializingProvider>(std::move(p));
}

}  // namespace amc
