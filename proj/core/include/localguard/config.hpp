#pragma once

#include <optional>
#include <string>
#include <vector>

#include "localguard/bundle.hpp"
#include "localguard/corpus.hpp"
#include "localguard/eval.hpp"
#include "localguard/guard.hpp"
#include "localguard/labeller.hpp"
#include "localguard/llm_client.hpp"

namespace localguard {

/// Pipeline configuration, read from one JSON file. Every section is
/// optional. Secrets are never read from here: endpoints name the
/// environment variable that holds them.
///
///   {"corpus":     {"lexicon": path, "n_flagged": n, "n_random": n, "seed": s},
///    "split":      {"train": .7, "valid": .15, "test": .15, "seed": s},
///    "llm":        {"providers": [...], "policy": "consensus", "retry_budget": 2,
///                   "max_in_flight": 8, "prompt": {"context": b, "fewshot": b, "cot": b}},
///    "embedding":  {"url": u, "auth_env_var": v, "dim": d, "max_batch": n, "store": path},
///    "classifier": {"kind": "ridge"|"nn", "alpha": a, "calibrate": b, "version": v,
///                   "nn": {"epochs", "batch", "lr", "hidden", "dropout", "seed"}},
///    "service":    {"bundle": dir, "host": h, "port": p, "max_batch": n,
///                   "thresholds": {"unsafe": t, ...}, "request_timeout_ms": ms},
///    "benchmark":  {"providers": [...], "cache": dir, "mapping": path, "max_in_flight": n}}
struct AppConfig {
  std::string lexicon_path;
  size_t n_flagged = 0;
  size_t n_random = 0;
  uint64_t sample_seed = 0;

  SplitRatios split;
  uint64_t split_seed = 0;

  std::vector<LlmEndpointConfig> llm;
  Policy policy = Policy::kConsensus;
  LabelOptions label;

  EmbeddingEndpointConfig embedding;
  size_t embedding_dim = 0;
  std::string store_path;

  TrainOptions train;

  ServiceConfig service;

  std::vector<ProviderEndpointConfig> providers;
  std::string provider_cache;  // directory holding one <provider>.jsonl cache per provider
  std::string mapping_path;
  size_t benchmark_max_in_flight = 8;
};

/// Throws std::invalid_argument on malformed values.
AppConfig parse_config(std::string_view json_text);
AppConfig load_config(const std::string& path);

}  // namespace localguard
