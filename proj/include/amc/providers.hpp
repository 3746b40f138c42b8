#pragma once

#include <fstream>
#include <memory>
#include <string>

#include <json.hpp>

#include "amc/errors.hpp"
#include "amc/http_provider.hpp"
#include "amc/ngram.hpp"
#include "amc/provider.hpp"

namespace amc {

enum class ProviderKind { kNgram, kHttp, kTable };

inline std::string to_string(ProviderKind k) {
  switch (k) {
    case ProviderKind::kNgram: return "ngram";
    case ProviderKind::kHttp: return "http";
    case ProviderKind::kTable: return "table";
  }
  return "?";
}

inline ProviderKind parse_provider_kind(const std::string& s) {
  if (s == "ngram") return ProviderKind::kNgram;
  if (s == "http") return ProviderKind::kHttp;
  if (s == "table") return ProviderKind::kTable;
  throw ConfigError("unknown provider kind '" + s + "'");
}

struct ProviderDescriptor {
  ProviderKind kind = ProviderKind::kNgram;
  // ngram
  std::string corpus;
  int order = 3;
  double alpha = 0.01;
  // http
  HttpConfig http;
  // table
  std::string table;

  void validate() const {
    switch (kind) {
      case ProviderKind::kNgram:
        if (corpus.empty()) throw ConfigError("ngram provider needs --corpus");
        break;
      case ProviderKind::kHttp:
        if (http.endpoint.empty()) throw ConfigError("http provider needs --endpoint");
        break;
      case ProviderKind::kTable:
        if (table.empty()) throw ConfigError("table provider needs --table");
        break;
    }
  }

  nlohmann::json to_json() const {
    nlohmann::json j = {{"kind", to_string(kind)}};
    switch (kind) {
      case ProviderKind::kNgram:
        j["corpus"] = corpus;
        j["order"] = order;
        j["alpha"] = alpha;
        break;
      case ProviderKind::kHttp:
        j["endpoint"] = http.endpoint;
        j["timeout_ms"] = http.timeout_ms;
        j["retries"] = http.retries;
        j["top_k"] = http.top_k;
        break;
      case ProviderKind::kTable:
        j["table"] = table;
        break;
    }
    return j;
  }

  static ProviderDescriptor from_json(const nlohmann::json& j) {
    ProviderDescriptor d;
    d.kind = parse_provider_kind(j.at("kind").get<std::string>());
    d.corpus = j.value("corpus", "");
    d.order = j.value("order", 3);
    d.alpha = j.value("alpha", 0.01);
    d.http.endpoint = j.value("endpoint", "");
    d.http.timeout_ms = j.value("timeout_ms", 10000);
    d.http.retries = j.value("retries", 2);
    d.http.top_k = j.value("top_k", 50);
    d.table = j.value("table", "");
    return d;
  }
};

inline ProviderPtr make_provider(const ProviderDescriptor& desc) {
  desc.validate();
  switch (desc.kind) {
    case ProviderKind::kNgram: {
      std::ifstream in(desc.corpus);
      if (!in) throw ConfigError("cannot open corpus '" + desc.corpus + "'");
      auto p = NgramProvider::train(in, desc.order, desc.alpha);
      p->set_corpus_path(desc.corpus);
      return p;
    }
    case ProviderKind::kHttp:
      return std::make_shared<HttpProvider>(desc.http);
    case ProviderKind::kTable: {
      std::ifstream in(desc.table);
      if (!in) throw ConfigError("cannot open table '" + desc.table + "'");
      nlohmann::json j;
      try {
        in >> j;
      } catch (const nlohmann::json::exception& e) {
        throw ConfigError("table '" + desc.table + "' is not valid JSON: " + e.what());
      }
      return TableProvider::from_json(j);
    }
  }
  throw ConfigError("unknown provider kind");
}

}  // namespace amc
