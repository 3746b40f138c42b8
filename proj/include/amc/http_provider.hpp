#pragma once

// Client for a remote logits server.
//
// Wire contract:
//   POST {endpoint}/prefix_distributions
//   {"tokens": ["a", "b", ...], "top_k": 50}
// ->
//   {"distributions": [[{"token": "x", "prob": 0.4}, ...], ...],
//    "tail_mass": [0.1, ...]}
// with one inner list per prefix x_1..x_i, i = 1..len(tokens), and each
// list's probabilities plus its tail summing to 1 within 1e-4.

#include <cmath>
#include <cstddef>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "amc/distribution.hpp"
#include "amc/errors.hpp"
#include "amc/provider.hpp"
#include "amc/tokens.hpp"

namespace amc {

inline constexpr double kWireMassTolerance = 1e-4;

struct HttpConfig {
  std::string endpoint;  // e.g. "http://127.0.0.1:8080" or "http://host/api"
  int timeout_ms = 10000;
  int retries = 2;
  int top_k = 50;
};

class HttpProvider final : public Provider {
 public:
  explicit HttpProvider(HttpConfig config) : config_(std::move(config)) {
    if (config_.endpoint.empty()) throw ConfigError("http provider needs an endpoint");
    if (config_.timeout_ms <= 0) throw ConfigError("timeout must be positive");
    if (config_.retries < 0) throw ConfigError("retry count must be non-negative");
    if (config_.top_k <= 0) throw ConfigError("top_k must be positive");
    split_endpoint();
  }

  std::string kind() const override { return "http"; }

  PrefixDistribution next_distribution(const TokenSequence& prefix) const override {
    if (prefix.empty()) throw ConfigError("next_distribution needs a non-empty prefix");
    auto all = fetch(prefix);
    return std::move(all.back());
  }

  // One request returns every prefix.
  std::vector<PrefixDistribution> batch_prefix_distributions(
      const TokenSequence& tokens) const override {
    if (tokens.empty()) throw ConfigError("batch_prefix_distributions needs at least one token");
    return fetch(tokens);
  }

  std::optional<TokenId> token_id(std::string_view token) const override {
    std::lock_guard lock(vocab_mu_);
    return vocab_.find(token);
  }
  std::string token_text(TokenId id) const override {
    std::lock_guard lock(vocab_mu_);
    return vocab_.token(id);
  }
  std::size_t vocab_size() const override {
    std::lock_guard lock(vocab_mu_);
    return vocab_.size();
  }

  nlohmann::json describe() const override {
    return {{"kind", "http"},
            {"endpoint", config_.endpoint},
            {"timeout_ms", config_.timeout_ms},
            {"retries", config_.retries},
            {"top_k", config_.top_k}};
  }

  const HttpConfig& config() const noexcept { return config_; }

  /// Parses and validates a response body. Public so the wire format can be
  /// tested without a server.
  std::vector<PrefixDistribution> parse_response(const std::string& body,
                                                 std::size_t expected) const {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(body);
    } catch (const nlohmann::json::parse_error& e) {
      throw ProviderError(std::string("malformed response body: ") + e.what());
    }
    try {
      const auto& dists = j.at("distributions");
      const auto& tails = j.at("tail_mass");
      if (!dists.is_array() || !tails.is_array() || dists.size() != expected ||
          tails.size() != expected) {
        throw ProviderError("response must carry " + std::to_string(expected) +
                            " distributions and tail masses");
      }
      std::vector<PrefixDistribution> out;
      out.reserve(expected);
      std::lock_guard lock(vocab_mu_);
      for (std::size_t i = 0; i < expected; ++i) {
        PrefixDistribution d;
        d.dense = false;
        d.prefix_len = i + 1;
        d.tail_mass = tails[i].get<double>();
        for (const auto& entry : dists[i]) {
          const auto id = vocab_.add(entry.at("token").get<std::string>());
          const double p = entry.at("prob").get<double>();
          if (!(p >= 0.0 && p <= 1.0)) {
            throw ProviderError("prefix " + std::to_string(i + 1) + ": probability out of range");
          }
          if (d.probs.size() <= id) d.probs.resize(id + 1, 0.0);
          d.probs[id] += p;
        }
        if (!(d.tail_mass >= 0.0 && d.tail_mass <= 1.0)) {
          throw ProviderError("prefix " + std::to_string(i + 1) + ": tail mass out of range");
        }
        const double total = d.total_mass();
        if (std::abs(total - 1.0) > kWireMassTolerance) {
          throw ProviderError("prefix " + std::to_string(i + 1) + ": mass " +
                              std::to_string(total) + " is not 1");
        }
        for (auto& p : d.probs) p /= total;
        d.tail_mass /= total;
        out.push_back(std::move(d));
      }
      return out;
    } catch (const nlohmann::json::exception& e) {
      throw ProviderError(std::string("malformed response body: ") + e.what());
    }
  }

 private:
  void split_endpoint() {
    const auto scheme = config_.endpoint.find("://");
    const auto path_start =
        config_.endpoint.find('/', scheme == std::string::npos ? 0 : scheme + 3);
    if (path_start == std::string::npos) {
      host_ = config_.endpoint;
      base_path_.clear();
    } else {
      host_ = config_.endpoint.substr(0, path_start);
      base_path_ = config_.endpoint.substr(path_start);
      while (!base_path_.empty() && base_path_.back() == '/') base_path_.pop_back();
    }
  }

  std::vector<PrefixDistribution> fetch(const TokenSequence& tokens) const {
    const nlohmann::json req = {{"tokens", tokens.words}, {"top_k", config_.top_k}};
    const std::string body = req.dump();
    const auto secs = config_.timeout_ms / 1000;
    const auto usecs = (config_.timeout_ms % 1000) * 1000;

    std::string last_error;
    for (int attempt = 0; attempt <= config_.retries; ++attempt) {
      httplib::Client cli(host_);
      cli.set_connection_timeout(secs, usecs);
      cli.set_read_timeout(secs, usecs);
      cli.set_write_timeout(secs, usecs);
      auto res = cli.Post(base_path_ + "/prefix_distributions", body, "application/json");
      if (!res) {
        last_error = httplib::to_string(res.error());
        continue;
      }
      if (res->status < 200 || res->status >= 300) {
        throw ProviderError("server returned HTTP " + std::to_string(res->status) + ": " +
                            res->body.substr(0, 200));
      }
      return parse_response(res->body, tokens.size());
    }
    throw ProviderError("request to " + config_.endpoint + " failed after " +
                        std::to_string(config_.retries + 1) + " attempt(s): " + last_error);
  }

  HttpConfig config_;
  std::string host_;
  std::string base_path_;
  // Token ids are assigned in order of first appearance in responses.
  mutable Vocabulary vocab_;
  mutable std::mutex vocab_mu_;
};

}  // namespace amc
