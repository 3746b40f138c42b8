#pragma once

#include <algorithm>
#include <cctype>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "amc/errors.hpp"

namespace amc {

using TokenId = std::uint32_t;

inline constexpr std::string_view kEosToken = "</s>";
inline constexpr std::string_view kMaskToken = "[MASK]";

/// Bijective token <-> id map. Ids 0 and 1 are always the end-of-sequence
/// and mask tokens.
class Vocabulary {
 public:
  static constexpr TokenId kEos = 0;
  static constexpr TokenId kMask = 1;

  Vocabulary() {
    add(std::string(kEosToken));
    add(std::string(kMaskToken));
  }

  /// Reserved tokens followed by `tokens` in order; duplicates are ignored.
  explicit Vocabulary(const std::vector<std::string>& tokens) : Vocabulary() {
    for (const auto& t : tokens) add(t);
  }

  TokenId add(const std::string& token) {
    if (auto it = to_id_.find(token); it != to_id_.end()) return it->second;
    const auto id = static_cast<TokenId>(to_token_.size());
    to_token_.push_back(token);
    to_id_.emplace(token, id);
    return id;
  }

  std::optional<TokenId> find(std::string_view token) const {
    auto it = to_id_.find(std::string(token));
    if (it == to_id_.end()) return std::nullopt;
    return it->second;
  }

  TokenId id(std::string_view token, std::size_t position = 0) const {
    if (auto id = find(token)) return *id;
    throw LookupError(std::string(token), position);
  }

  const std::string& token(TokenId id) const { return to_token_.at(id); }
  std::size_t size() const noexcept { return to_token_.size(); }
  const std::vector<std::string>& tokens() const noexcept { return to_token_; }

 private:
  std::vector<std::string> to_token_;
  std::unordered_map<std::string, TokenId> to_id_;
};

/// A context x_1..x_n. Surface strings are authoritative; ids are resolved
/// against a provider's vocabulary when needed.
struct TokenSequence {
  std::vector<std::string> words;

  std::size_t size() const noexcept { return words.size(); }
  bool empty() const noexcept { return words.empty(); }

  TokenSequence prefix(std::size_t len) const {
    return TokenSequence{{words.begin(), words.begin() + static_cast<std::ptrdiff_t>(len)}};
  }

  std::string text() const {
    std::string out;
    for (const auto& w : words) {
      if (!out.empty()) out += ' ';
      out += w;
    }
    return out;
  }

  friend bool operator==(const TokenSequence&, const TokenSequence&) = default;
};

inline bool is_reserved_token(std::string_view w) { return w == kEosToken || w == kMaskToken; }

// Whitespace split, optionally lowercased. Reserved tokens keep their
// spelling so that "[MASK]" survives a round trip through text.
inline TokenSequence tokenize(std::string_view text, bool lowercase = true) {
  TokenSequence seq;
  std::istringstream in{std::string(text)};
  std::string w;
  while (in >> w) {
    if (lowercase && !is_reserved_token(w)) {
      std::transform(w.begin(), w.end(), w.begin(),
                     [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    }
    seq.words.push_back(std::move(w));
  }
  return seq;
}

}  // namespace amc
