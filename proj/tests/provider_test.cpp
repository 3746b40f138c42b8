#include <fstream>
#include <thread>
#include <vector>

#include <gtest/gtest.h>

#include "amc/providers.hpp"

namespace amc {
namespace {

ProviderPtr abc_table() {
  ProviderDescriptor desc;
  desc.kind = ProviderKind::kTable;
  desc.table = AMC_DATA_DIR "/fixtures/abc_table.json";
  return make_provider(desc);
}

TEST(TableProvider, Passthrough) {
  const auto p = abc_table();
  const auto d = p->next_distribution(p->tokenize_text("A"));
  EXPECT_EQ(d.prob(*p->token_id("B")), 0.5);
  EXPECT_EQ(d.prob(*p->token_id("C")), 0.3);
  EXPECT_EQ(d.tail_mass, 0.2);
  EXPECT_FALSE(d.dense);
  EXPECT_EQ(d.prefix_len, 1u);
}

TEST(TableProvider, BatchReturnsRowsInOrder) {
  const auto p = abc_table();
  const auto all = p->batch_prefix_distributions(TokenSequence{{"A", "B", "C"}});
  ASSERT_EQ(all.size(), 3u);
  EXPECT_EQ(all[0].tail_mass, 0.2);
  EXPECT_EQ(all[1].tail_mass, 0.4);
  EXPECT_EQ(all[2].tail_mass, 0.6);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(all[i].prefix_len, i + 1);
}

TEST(TableProvider, MissingRowAndUnknownToken) {
  const auto p = abc_table();
  EXPECT_THROW(p->next_distribution(TokenSequence{{"B"}}), ProviderError);
  try {
    p->next_distribution(TokenSequence{{"A", "Q"}});
    FAIL();
  } catch (const LookupError& e) {
    EXPECT_EQ(e.position(), 1u);
  }
  try {
    p->batch_prefix_distributions(TokenSequence{{"A", "C"}});
    FAIL();
  } catch (const ProviderError& e) {
    EXPECT_NE(std::string(e.what()).find("prefix length 2"), std::string::npos);
  }
}

TEST(TableProvider, RejectsBadMass) {
  const nlohmann::json bad = {
      {"vocab", {"A"}},
      {"rows", {{{"prefix", {"A"}}, {"probs", {{"A", 0.5}}}, {"tail", 0.1}}}}};
  EXPECT_THROW(TableProvider::from_json(bad), ConfigError);
  EXPECT_THROW(TableProvider::from_json(nlohmann::json{{"rows", 1}}), ConfigError);
}

TEST(TableProvider, DenseRows) {
  const nlohmann::json j = {
      {"vocab", {"A", "B"}},
      {"rows", {{{"prefix", {"A"}}, {"probs", {{"A", 0.25}, {"B", 0.75}}}}}}};
  const auto p = TableProvider::from_json(j);
  const auto d = p->next_distribution(TokenSequence{{"A"}});
  EXPECT_TRUE(d.dense);
  EXPECT_NO_THROW(d.validate());
}

TEST(ProviderDescriptor, Validation) {
  ProviderDescriptor d;
  d.kind = ProviderKind::kNgram;
  EXPECT_THROW(make_provider(d), ConfigError);
  d.corpus = "/nonexistent/corpus.txt";
  EXPECT_THROW(make_provider(d), ConfigError);
  d.kind = ProviderKind::kHttp;
  EXPECT_THROW(make_provider(d), ConfigError);
  d.kind = ProviderKind::kTable;
  EXPECT_THROW(make_provider(d), ConfigError);
  EXPECT_THROW(parse_provider_kind("gpt"), ConfigError);
}

TEST(ProviderDescriptor, JsonRoundTrip) {
  ProviderDescriptor d;
  d.kind = ProviderKind::kHttp;
  d.http.endpoint = "http://localhost:9/x";
  d.http.timeout_ms = 250;
  d.http.retries = 4;
  const auto back = ProviderDescriptor::from_json(d.to_json());
  EXPECT_EQ(back.to_json(), d.to_json());
}

TEST(ProviderDescriptor, NgramFromCorpusFile) {
  ProviderDescriptor d;
  d.corpus = AMC_DATA_DIR "/toy_corpus.txt";
  d.order = 3;
  d.alpha = 0.01;
  const auto p = make_provider(d);
  EXPECT_EQ(p->kind(), "ngram");
  EXPECT_EQ(p->describe().at("corpus"), d.corpus);
}

TEST(SerializingProvider, ConcurrentCallsAgree) {
  const auto inner = NgramProvider::train("a b c a b c a a b", 2, 0.1);
  SerializingProvider p(inner);
  const auto expected = inner->next_distribution(tokenize("a b"));
  std::vector<std::thread> threads;
  std::vector<int> ok(8, 0);
  for (int t = 0; t < 8; ++t) {
    threads.emplace_back([&, t] {
      for (int k = 0; k < 200; ++k)
        ok[t] += p.next_distribution(tokenize("a b")).probs == expected.probs;
    });
  }
  for (auto& th : threads) th.join();
  for (int v : ok) EXPECT_EQ(v, 200);
}

}  // namespace
}  // namespace amc
