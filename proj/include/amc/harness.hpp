#pragma once

// Dataset I/O, multiple-choice evaluation, the masking experiment and
// inspection dumps.

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <istream>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "amc/csv.hpp"
#include "amc/decode.hpp"
#include "amc/errors.hpp"
#include "amc/provider.hpp"
#include "amc/tokens.hpp"
#include "amc/transition.hpp"

namespace amc {

struct McItem {
  std::string id;
  std::string question;
  std::vector<std::string> choices;
  std::size_t correct_index = 0;
};

inline McItem parse_mc_item(const nlohmann::json& j, std::size_t line = 0) {
  McItem item;
  try {
    item.id = j.at("id").is_string() ? j.at("id").get<std::string>() : j.at("id").dump();
    item.question = j.at("question").get<std::string>();
    item.choices = j.at("choices").get<std::vector<std::string>>();
    item.correct_index = j.at("correct_index").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw DatasetError(std::string("bad item: ") + e.what(), line);
  }
  if (item.choices.size() < 2) throw DatasetError("item needs at least two choices", line);
  if (item.correct_index >= item.choices.size())
    throw DatasetError("correct_index out of range", line);
  if (tokenize(item.question).empty()) throw DatasetError("empty question", line);
  for (const auto& c : item.choices)
    if (tokenize(c).empty()) throw DatasetError("empty choice", line);
  return item;
}

inline nlohmann::json to_json(const McItem& item) {
  return {{"id", item.id},
          {"question", item.question},
          {"choices", item.choices},
          {"correct_index", item.correct_index}};
}

/// One JSON object per line; blank lines are skipped.
inline std::vector<McItem> read_mc_dataset(std::istream& in) {
  std::vector<McItem> items;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw DatasetError(std::string("invalid JSON: ") + e.what(), line_no);
    }
    items.push_back(parse_mc_item(j, line_no));
  }
  return items;
}

inline std::vector<McItem> load_mc_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DatasetError("cannot open dataset '" + path + "'");
  return read_mc_dataset(in);
}

struct EvalConfig {
  DecodeOptions decode;
  bool length_normalize = true;
  unsigned jobs = 1;
  std::uint64_t seed = 0;
  std::string dataset;      // recorded in the digest when set
  nlohmann::json provider;  // descriptor; filled from the provider when empty

  nlohmann::json digest(const Provider& p) const {
    const auto& pol = decode.analysis.policy;
    return {{"lambda", decode.adjust.lambda},
            {"mode", to_string(decode.mode)},
            {"include_unconditional", decode.adjust.include_unconditional},
            {"duplicate_policy", to_string(pol.duplicate_policy)},
            {"delta_abs", pol.delta_abs},
            {"scale_to_fit", pol.scale_to_fit},
            {"score_cap", decode.analysis.score_cap},
            {"length_normalize", length_normalize},
            {"seed", seed},
            {"dataset", dataset},
            {"provider", provider.is_null() ? p.describe() : provider}};
  }

  /// Inverse of digest(), minus the provider (rebuilt by the caller).
  static EvalConfig from_digest(const nlohmann::json& j) {
    EvalConfig cfg;
    cfg.decode.adjust.lambda = j.at("lambda").get<double>();
    cfg.decode.mode = parse_decode_mode(j.at("mode").get<std::string>());
    cfg.decode.adjust.include_unconditional = j.at("include_unconditional").get<bool>();
    auto& pol = cfg.decode.analysis.policy;
    pol.duplicate_policy = parse_duplicate_policy(j.at("duplicate_policy").get<std::string>());
    pol.delta_abs = j.at("delta_abs").get<double>();
    pol.scale_to_fit = j.at("scale_to_fit").get<bool>();
    cfg.decode.analysis.score_cap = j.at("score_cap").get<double>();
    cfg.length_normalize = j.at("length_normalize").get<bool>();
    cfg.seed = j.at("seed").get<std::uint64_t>();
    cfg.dataset = j.value("dataset", "");
    cfg.provider = j.at("provider");
    return cfg;
  }
};

struct ItemResult {
  std::string id;
  std::size_t correct_index = 0;
  std::optional<std::size_t> chosen_index;  // empty when the item failed
  std::vector<double> scores;
  std::size_t clamped_tokens = 0;
  std::string error;

  bool failed() const noexcept { return !chosen_index.has_value(); }
  bool correct() const noexcept { return chosen_index && *chosen_index == correct_index; }
};

struct EvalReport {
  double accuracy = 0.0;
  std::size_t correct = 0;
  std::size_t evaluated = 0;
  std::size_t failed = 0;
  std::vector<ItemResult> per_item;  // sorted by id
  nlohmann::json config;
};

inline ItemResult evaluate_item(const Provider& provider, const McItem& item,
                                const EvalConfig& cfg) {
  ItemResult r;
  r.id = item.id;
  r.correct_index = item.correct_index;
  try {
    const auto question = provider.tokenize_text(item.question);
    for (const auto& choice : item.choices) {
      const auto cont = provider.tokenize_text(choice);
      const auto s = score_continuation(provider, question, cont, cfg.decode);
      r.scores.push_back(cfg.length_normalize ? s.mean_logprob() : s.logprob);
      r.clamped_tokens += s.clamped;
    }
    std::size_t best = 0;
    for (std::size_t c = 1; c < r.scores.size(); ++c)
      if (r.scores[c] > r.scores[best]) best = c;
    r.chosen_index = best;
  } catch (const Error& e) {
    // Provider and lookup failures exclude the item; they do not abort the run.
    r.scores.clear();
    r.error = e.what();
  }
  return r;
}

/// Scores every choice as a continuation of the question and picks the best.
/// Items run on up to `cfg.jobs` threads; the report is ordered by id.
inline EvalReport eval_mc(const Provider& provider, const std::vector<McItem>& items,
                          const EvalConfig& cfg) {
  std::vector<ItemResult> results(items.size());
  const auto cap = static_cast<unsigned>(std::max<std::size_t>(items.size(), 1));
  const unsigned jobs = std::clamp(cfg.jobs, 1u, cap);
  if (jobs == 1) {
    for (std::size_t i = 0; i < items.size(); ++i)
      results[i] = evaluate_item(provider, items[i], cfg);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < jobs; ++t) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < items.size(); i = next++)
          results[i] = evaluate_item(provider, items[i], cfg);
      });
    }
    for (auto& th : pool) th.join();
  }
  std::stable_sort(results.begin(), results.end(),
                   [](const ItemResult& a, const ItemResult& b) { return a.id < b.id; });

  EvalReport report;
  for (const auto& r : results) {
    if (r.failed()) {
      ++report.failed;
      continue;
    }
    ++report.evaluated;
    if (r.correct()) ++report.correct;
  }
  if (report.evaluated) {
    report.accuracy = static_cast<double>(report.correct) / static_cast<double>(report.evaluated);
  }
  report.per_item = std::move(results);
  report.config = cfg.digest(provider);
  return report;
}

inline nlohmann::json to_json(const EvalReport& r) {
  nlohmann::json items = nlohmann::json::array();
  for (const auto& it : r.per_item) {
    nlohmann::json j = {{"id", it.id}, {"correct_index", it.correct_index}};
    if (it.chosen_index) {
      j["chosen_index"] = *it.chosen_index;
      j["scores"] = it.scores;
      if (it.clamped_tokens) j["clamped_tokens"] = it.clamped_tokens;
    } else {
      j["chosen_index"] = nullptr;
      j["error"] = it.error;
    }
    items.push_back(std::move(j));
  }
  return {{"accuracy", r.accuracy}, {"correct", r.correct}, {"evaluated", r.evaluated},
          {"failed", r.failed},     {"config", r.config},   {"items", items}};
}

// ---------------------------------------------------------------------------
// Masking experiment

enum class MaskPolicy { kInfoScore, kRandom };

inline std::string to_string(MaskPolicy p) {
  return p == MaskPolicy::kInfoScore ? "info-score" : "random";
}

inline MaskPolicy parse_mask_policy(const std::string& s) {
  if (s == "info-score") return MaskPolicy::kInfoScore;
  if (s == "random") return MaskPolicy::kRandom;
  throw ConfigError("unknown mask policy '" + s + "'");
}

struct MaskSpec {
  std::vector<std::size_t> k_values{0, 5, 10, 15};
  std::vector<MaskPolicy> policies{MaskPolicy::kInfoScore, MaskPolicy::kRandom};
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  std::string mask_token{kMaskToken};

  void validate() const {
    if (!std::is_sorted(k_values.begin(), k_values.end()))
      throw ConfigError("k values must be sorted ascending");
    if (policies.empty()) throw ConfigError("at least one mask policy is required");
    for (auto p : policies)
      if (p == MaskPolicy::kRandom && seeds.empty())
        throw ConfigError("random masking needs at least one seed");
  }
};

struct MaskRow {
  MaskPolicy policy = MaskPolicy::kInfoScore;
  std::size_t k = 0;
  std::optional<std::uint64_t> seed;  // empty for info-score and for the random mean row
  bool mean = false;
  double accuracy = 0.0;
  std::size_t evaluated = 0;
  std::size_t skipped = 0;  // items shorter than k
};

/// Question positions ordered by information score, highest first; ties go
/// to the earlier position.
inline std::vector<std::size_t> rank_by_info_score(const std::vector<double>& scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return order;
}

/// k distinct positions in [0, len), reproducible from (seed, item index).
inline std::vector<std::size_t> random_positions(std::size_t len, std::size_t k,
                                                 std::uint64_t seed, std::size_t item_index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(item_index),
                    static_cast<std::uint32_t>(static_cast<std::uint64_t>(item_index) >> 32)};
  std::mt19937_64 rng(seq);
  std::vector<std::size_t> pos(len);
  std::iota(pos.begin(), pos.end(), std::size_t{0});
  // Partial Fisher-Yates: the first k slots are a uniform k-subset.
  for (std::size_t i = 0; i < k && i + 1 < len; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, len - 1);
    std::swap(pos[i], pos[pick(rng)]);
  }
  pos.resize(std::min(k, len));
  return pos;
}

inline std::string mask_positions(const TokenSequence& q, const std::vector<std::size_t>& positions,
                                  std::size_t k, const std::string& mask_token) {
  TokenSequence out = q;
  for (std::size_t i = 0; i < k; ++i) out.words[positions[i]] = mask_token;
  return out.text();
}

/// Replaces k question tokens with the mask token, chosen either by
/// information score or uniformly at random, and re-runs the evaluation.
/// Random rows come per seed plus one mean row per k.
inline std::vector<MaskRow> mask_experiment(const Provider& provider,
                                            const std::vector<McItem>& items,
                                            const MaskSpec& spec, const EvalConfig& cfg) {
  spec.validate();
  std::vector<TokenSequence> questions;
  questions.reserve(items.size());
  for (const auto& it : items) questions.push_back(provider.tokenize_text(it.question));

  const bool want_info = std::find(spec.policies.begin(), spec.policies.end(),
                                   MaskPolicy::kInfoScore) != spec.policies.end();
  std::vector<std::optional<std::vector<std::size_t>>> info_rank(items.size());
  if (want_info) {
    AnalysisOptions aopt = cfg.decode.analysis;
    aopt.keep_matrices = false;
    for (std::size_t i = 0; i < items.size(); ++i) {
      try {
        const auto a = analyze_context(provider, questions[i], aopt);
        info_rank[i] = rank_by_info_score(a.profile.scores);
      } catch (const ProviderError&) {
        // Left empty: the item is counted as failed for every k.
      } catch (const LookupError&) {
      }
    }
  }

  auto run = [&](MaskPolicy policy, std::size_t k, std::optional<std::uint64_t> seed) {
    MaskRow row;
    row.policy = policy;
    row.k = k;
    row.seed = seed;
    std::vector<McItem> masked;
    for (std::size_t i = 0; i < items.size(); ++i) {
      const auto& q = questions[i];
      if (k > q.size()) {
        ++row.skipped;
        continue;
      }
      McItem m = items[i];
      if (policy == MaskPolicy::kInfoScore) {
        if (!info_rank[i]) continue;
        m.question = mask_positions(q, *info_rank[i], k, spec.mask_token);
      } else {
        m.question = mask_positions(q, random_positions(q.size(), k, *seed, i), k, spec.mask_token);
      }
      masked.push_back(std::move(m));
    }
    const auto report = eval_mc(provider, masked, cfg);
    row.accuracy = report.accuracy;
    row.evaluated = report.evaluated;
    return row;
  };

  std::vector<MaskRow> rows;
  for (auto policy : spec.policies) {
    for (std::size_t k : spec.k_values) {
      if (policy == MaskPolicy::kInfoScore) {
        rows.push_back(run(policy, k, std::nullopt));
        continue;
      }
      double sum = 0.0;
      MaskRow mean;
      mean.policy = policy;
      mean.k = k;
      mean.mean = true;
      for (auto seed : spec.seeds) {
        rows.push_back(run(policy, k, seed));
        sum += rows.back().accuracy;
        mean.evaluated += rows.back().evaluated;
        mean.skipped = rows.back().skipped;
      }
      mean.accuracy = sum / static_cast<double>(spec.seeds.size());
      rows.push_back(mean);
    }
  }
  return rows;
}

/// policy,k,seed,accuracy,skipped
inline void write_mask_csv(std::ostream& out, const std::vector<MaskRow>& rows) {
  csv::write_row(out, {"policy", "k", "seed", "accuracy", "skipped"});
  for (const auto& r : rows) {
    std::string seed = r.mean ? "mean" : (r.seed ? std::to_string(*r.seed) : "");
    csv::write_row(out, {to_string(r.policy), std::to_string(r.k), seed, csv::number(r.accuracy),
                         std::to_string(r.skipped)});
  }
}

/// Mean accuracy per k for one policy (the mean row for random masking).
inline std::optional<double> mask_accuracy(const std::vector<MaskRow>& rows, MaskPolicy policy,
                                           std::size_t k) {
  for (const auto& r : rows) {
    if (r.policy != policy || r.k != k) continue;
    if (policy == MaskPolicy::kInfoScore || r.mean) return r.accuracy;
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Inspection

struct InspectOptions {
  AnalysisOptions analysis;
  bool include_p = true;
  std::size_t top_k = 5;
};

inline nlohmann::json matrix_json(const Matrix& m) { return m.to_rows(); }

inline nlohmann::json inspect_json(const Provider& provider, const TokenSequence& tokens,
                                   const InspectOptions& opts = {}) {
  AnalysisOptions aopt = opts.analysis;
  aopt.keep_matrices = true;
  const auto a = analyze_context(provider, tokens, aopt);
  nlohmann::json top = nlohmann::json::array();
  for (const auto& d : a.dists) {
    nlohmann::json row = nlohmann::json::array();
    for (const auto& [tok, p] : digest(provider, d.probs, opts.top_k).top)
      row.push_back({{"token", tok}, {"prob", p}});
    top.push_back(std::move(row));
  }
  nlohmann::json out;
  out["tokens"] = tokens.words;
  if (opts.include_p) out["P"] = matrix_json(a.p->matrix());
  out["V"] = matrix_json(a.v->matrix());
  out["S"] = a.profile.scores;
  out["L"] = a.profile.losses;
  out["top"] = top;
  return out;
}

/// Long-format CSV carrying the same numbers as inspect_json:
///   section,i,j,token,value
inline std::string inspect_csv(const nlohmann::json& doc) {
  std::ostringstream out;
  csv::write_row(out, {"section", "i", "j", "token", "value"});
  const auto& tokens = doc.at("tokens");
  for (std::size_t i = 0; i < tokens.size(); ++i)
    csv::write_row(out, {"token", std::to_string(i), "", tokens[i].get<std::string>(), ""});
  for (const char* name : {"S", "L"}) {
    const auto& v = doc.at(name);
    for (std::size_t i = 0; i < v.size(); ++i)
      csv::write_row(out, {name, std::to_string(i), "", "", csv::number(v[i].get<double>())});
  }
  for (const char* name : {"P", "V"}) {
    if (!doc.contains(name)) continue;
    const auto& m = doc.at(name);
    for (std::size_t i = 0; i < m.size(); ++i)
      for (std::size_t j = 0; j < m[i].size(); ++j)
        csv::write_row(out, {name, std::to_string(i), std::to_string(j), "",
                             csv::number(m[i][j].get<double>())});
  }
  const auto& top = doc.at("top");
  for (std::size_t i = 0; i < top.size(); ++i)
    for (std::size_t r = 0; r < top[i].size(); ++r)
      csv::write_row(out, {"top", std::to_string(i), std::to_string(r),
                           top[i][r].at("token").get<std::string>(),
                           csv::number(top[i][r].at("prob").get<double>())});
  return out.str();
}

}  // namespace amc
