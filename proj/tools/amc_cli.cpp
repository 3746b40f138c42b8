// amc: information-flow analysis and adjusted decoding over token contexts.
//
//   amc inspect --provider table --table t.json --prompt "A B C"
//   amc generate --corpus data/toy_corpus.txt --prompt "the capital city of" --mode amc
//   amc eval-mc --corpus data/toy_corpus.txt --dataset data/synthetic_mc.jsonl
//   amc mask-experiment --corpus data/toy_corpus.txt --dataset data/synthetic_mc.jsonl
//   amc train-ngram --corpus data/toy_corpus.txt --output model.json

#include <cstdint>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "amc/amc.hpp"

namespace {

struct Options {
  amc::ProviderDescriptor provider;
  std::string provider_kind = "ngram";
  double lambda = amc::kDefaultLambda;
  double delta_abs = amc::kDefaultDeltaAbs;
  double score_cap = amc::kDefaultScoreCap;
  std::string duplicate_policy = "full-mass";
  bool include_unconditional = false;
  bool no_length_norm = false;
  std::uint64_t seed = 0;
  unsigned jobs = 1;
  std::string format = "json";
  std::string output;

  // subcommand specific
  std::string dataset;
  std::string from_report;
  std::vector<double> lambda_grid;
  std::string prompt;
  std::size_t max_tokens = 16;
  std::string mode = "amc";
  std::string trace;
  bool no_p = false;
  std::vector<std::size_t> k_values{0, 5, 10, 15};
  std::vector<std::string> policies{"info-score", "random"};
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  std::string mask_token{amc::kMaskToken};
};

void add_shared_flags(CLI::App& app, Options& o) {
  app.add_option("--provider", o.provider_kind, "ngram | http | table")
      ->check(CLI::IsMember({"ngram", "http", "table"}));
  app.add_option("--corpus", o.provider.corpus, "Training text for the n-gram provider");
  app.add_option("--order", o.provider.order, "n-gram order")->check(CLI::Range(1, 5));
  app.add_option("--alpha", o.provider.alpha, "Additive smoothing constant");
  app.add_option("--endpoint", o.provider.http.endpoint, "Logits server base URL")
      ->envname("AMC_ENDPOINT");
  app.add_option("--timeout-ms", o.provider.http.timeout_ms, "HTTP timeout per attempt")
      ->envname("AMC_TIMEOUT_MS");
  app.add_option("--retries", o.provider.http.retries, "HTTP retries after a failed attempt")
      ->envname("AMC_RETRIES");
  app.add_option("--top-k", o.provider.http.top_k, "Entries requested per prefix");
  app.add_option("--table", o.provider.table, "JSON distribution table");
  app.add_option("--lambda", o.lambda, "Adjustment strength");
  app.add_option("--delta-abs", o.delta_abs, "Minimum absorbing mass per row");
  app.add_option("--score-cap", o.score_cap, "Largest information score, nats");
  app.add_option("--duplicate-policy", o.duplicate_policy, "full-mass | split-mass")
      ->check(CLI::IsMember({"full-mass", "split-mass"}));
  app.add_flag("--include-unconditional", o.include_unconditional,
               "Add the empty-prefix distribution to the adjustment");
  app.add_flag("--no-length-norm", o.no_length_norm, "Score choices by summed log-prob");
  app.add_option("--seed", o.seed, "Seed recorded in reports");
  app.add_option("--jobs", o.jobs, "Items evaluated concurrently")->check(CLI::PositiveNumber);
  app.add_option("--format", o.format, "json | csv")->check(CLI::IsMember({"json", "csv"}));
  app.add_option("--output,-o", o.output, "Write the result here instead of stdout");
}

amc::DecodeOptions decode_options(const Options& o) {
  amc::DecodeOptions d;
  d.mode = amc::parse_decode_mode(o.mode);
  d.adjust.lambda = o.lambda;
  d.adjust.include_unconditional = o.include_unconditional;
  d.analysis.policy.duplicate_policy = amc::parse_duplicate_policy(o.duplicate_policy);
  d.analysis.policy.delta_abs = o.delta_abs;
  d.analysis.score_cap = o.score_cap;
  d.analysis.keep_matrices = false;
  d.analysis.policy.validate();
  if (!(o.lambda >= 0.0)) throw amc::ConfigError("--lambda must be non-negative");
  if (!(o.score_cap > 0.0)) throw amc::ConfigError("--score-cap must be positive");
  return d;
}

amc::ProviderPtr provider_from(Options& o) {
  o.provider.kind = amc::parse_provider_kind(o.provider_kind);
  return amc::make_concurrency_safe(amc::make_provider(o.provider));
}

void emit(const Options& o, const std::string& text) {
  if (o.output.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream out(o.output, std::ios::binary);
  if (!out) throw amc::ConfigError("cannot write '" + o.output + "'");
  out << text;
}

int run_inspect(Options& o) {
  auto provider = provider_from(o);
  const auto tokens = provider->tokenize_text(o.prompt);
  if (tokens.empty()) throw amc::ConfigError("--prompt must not be empty");
  amc::InspectOptions opts;
  const auto d = decode_options(o);
  opts.analysis = d.analysis;
  opts.include_p = !o.no_p;
  const auto doc = amc::inspect_json(*provider, tokens, opts);
  emit(o, o.format == "csv" ? amc::inspect_csv(doc) : doc.dump(2) + "\n");
  return 0;
}

int run_generate(Options& o) {
  auto provider = provider_from(o);
  const auto prompt = provider->tokenize_text(o.prompt);
  if (prompt.empty()) throw amc::ConfigError("--prompt must not be empty");
  const auto opts = decode_options(o);
  amc::GenerationTrace trace;
  int code = 0;
  try {
    trace = amc::generate(*provider, prompt, o.max_tokens, opts);
  } catch (const amc::GenerationAborted& e) {
    std::cerr << "amc: " << e.what() << "\n";
    trace = e.partial();
    code = static_cast<int>(e.exit_code());
  }
  if (!o.trace.empty()) {
    std::ofstream out(o.trace);
    if (!out) throw amc::ConfigError("cannot write '" + o.trace + "'");
    out << amc::to_json(trace).dump(2) << "\n";
  }
  emit(o, trace.output().text() + "\n");
  return code;
}

amc::EvalConfig eval_config(const Options& o) {
  amc::EvalConfig cfg;
  cfg.decode = decode_options(o);
  cfg.length_normalize = !o.no_length_norm;
  cfg.jobs = o.jobs;
  cfg.seed = o.seed;
  cfg.dataset = o.dataset;
  cfg.provider = o.provider.to_json();
  return cfg;
}

int run_eval(Options& o) {
  amc::EvalConfig cfg;
  amc::ProviderPtr provider;
  if (!o.from_report.empty()) {
    std::ifstream in(o.from_report);
    if (!in) throw amc::ConfigError("cannot open report '" + o.from_report + "'");
    nlohmann::json report;
    try {
      in >> report;
      cfg = amc::EvalConfig::from_digest(report.at("config"));
      o.provider = amc::ProviderDescriptor::from_json(cfg.provider);
    } catch (const nlohmann::json::exception& e) {
      throw amc::ConfigError(std::string("report has no usable config: ") + e.what());
    }
    cfg.jobs = o.jobs;
    if (o.dataset.empty()) o.dataset = cfg.dataset;
    provider = amc::make_concurrency_safe(amc::make_provider(o.provider));
  } else {
    provider = provider_from(o);
    cfg = eval_config(o);
  }
  if (o.dataset.empty()) throw amc::ConfigError("--dataset is required");
  const auto items = amc::load_mc_dataset(o.dataset);

  if (o.lambda_grid.empty()) {
    emit(o, amc::to_json(amc::eval_mc(*provider, items, cfg)).dump(2) + "\n");
    return 0;
  }
  nlohmann::json grid = nlohmann::json::array();
  for (double lambda : o.lambda_grid) {
    if (!(lambda >= 0.0)) throw amc::ConfigError("lambda grid values must be non-negative");
    auto c = cfg;
    c.decode.adjust.lambda = lambda;
    const auto r = amc::eval_mc(*provider, items, c);
    grid.push_back({{"lambda", lambda},
                    {"accuracy", r.accuracy},
                    {"evaluated", r.evaluated},
                    {"failed", r.failed},
                    {"config", r.config}});
  }
  emit(o, nlohmann::json{{"grid", grid}}.dump(2) + "\n");
  return 0;
}

int run_mask(Options& o) {
  auto provider = provider_from(o);
  if (o.dataset.empty()) throw amc::ConfigError("--dataset is required");
  const auto items = amc::load_mc_dataset(o.dataset);
  amc::MaskSpec spec;
  spec.k_values = o.k_values;
  spec.policies.clear();
  for (const auto& p : o.policies) spec.policies.push_back(amc::parse_mask_policy(p));
  spec.seeds = o.seeds;
  spec.mask_token = o.mask_token;
  const auto rows = amc::mask_experiment(*provider, items, spec, eval_config(o));
  std::size_t skipped = 0;
  for (const auto& r : rows) skipped += r.skipped;
  if (skipped) {
    std::cerr << "amc: warning: " << skipped
              << " item evaluations skipped (k > question length)\n";
  }
  std::ostringstream out;
  amc::write_mask_csv(out, rows);
  emit(o, out.str());
  return 0;
}

int run_train(Options& o) {
  if (o.provider.corpus.empty()) throw amc::ConfigError("--corpus is required");
  std::ifstream in(o.provider.corpus);
  if (!in) throw amc::ConfigError("cannot open corpus '" + o.provider.corpus + "'");
  const auto lm = amc::NgramProvider::train(in, o.provider.order, o.provider.alpha);
  lm->set_corpus_path(o.provider.corpus);
  nlohmann::json summary = lm->describe();
  summary["vocab_size"] = lm->vocab_size();
  summary["contexts"] = lm->context_count();
  summary["tokens"] = lm->tokens_seen();
  if (!o.output.empty()) {
    nlohmann::json model = summary;
    model["vocab"] = lm->vocabulary().tokens();
    model["counts"] = lm->counts_json();
    emit(o, model.dump() + "\n");
  }
  std::cerr << summary.dump() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Absorbing-chain information flow analysis and adjusted decoding"};
  app.require_subcommand(1);
  Options o;

  auto* inspect = app.add_subcommand("inspect", "Dump P, V, scores and losses for a prompt");
  add_shared_flags(*inspect, o);
  inspect->add_option("--prompt", o.prompt, "Context text")->required();
  inspect->add_flag("--no-p", o.no_p, "Omit the transition matrix");

  auto* gen = app.add_subcommand("generate", "Greedy decoding, optionally adjusted");
  add_shared_flags(*gen, o);
  gen->add_option("--prompt", o.prompt, "Prompt text")->required();
  gen->add_option("--max-tokens", o.max_tokens, "Tokens to emit")->check(CLI::PositiveNumber);
  gen->add_option("--mode", o.mode, "baseline | amc")->check(CLI::IsMember({"baseline", "amc"}));
  gen->add_option("--trace", o.trace, "Write a JSON trace of every step");

  auto* eval = app.add_subcommand("eval-mc", "Multiple-choice accuracy over a JSONL dataset");
  add_shared_flags(*eval, o);
  eval->add_option("--dataset", o.dataset, "JSONL dataset");
  eval->add_option("--lambda-grid", o.lambda_grid, "Evaluate each lambda, emit a grid report")
      ->delimiter(',');
  eval->add_option("--from-report", o.from_report, "Re-run with the config of a saved report");

  auto* mask = app.add_subcommand("mask-experiment", "Accuracy after masking question tokens");
  add_shared_flags(*mask, o);
  mask->add_option("--dataset", o.dataset, "JSONL dataset")->required();
  mask->add_option("--k", o.k_values, "Token counts to mask")->delimiter(',');
  mask->add_option("--policy", o.policies, "info-score, random")->delimiter(',');
  mask->add_option("--seeds", o.seeds, "Seeds for random masking")->delimiter(',');
  mask->add_option("--mask-token", o.mask_token, "Replacement token");

  auto* train = app.add_subcommand("train-ngram", "Train the toy n-gram model and summarize it");
  add_shared_flags(*train, o);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : static_cast<int>(amc::ExitCode::kConfig);
  }

  try {
    if (*inspect) return run_inspect(o);
    if (*gen) return run_generate(o);
    if (*eval) return run_eval(o);
    if (*mask) return run_mask(o);
    if (*train) return run_train(o);
  } catch (const amc::Error& e) {
    std::cerr << "amc: " << e.what() << "\n";
    return static_cast<int>(e.exit_code());
  } catch (const std::exception& e) {
    std::cerr << "amc: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
