#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "localguard/bundle.hpp"
#include "localguard/embedder.hpp"
#include "localguard/labeller.hpp"
#include "localguard/taxonomy.hpp"

namespace localguard {

struct ScoredExample {
  std::string record_id;
  double score = 0.0;
  int gold = 0;  // 0 or 1
};

class MetricError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Average precision with step interpolation. Examples are sorted by score
/// descending and equal scores form one threshold group:
///   AP = sum over groups k of (R_k - R_{k-1}) * P_k.
/// Throws MetricError("no_positives") when no example is positive.
double pr_auc(std::span<const ScoredExample> examples);

struct ThresholdMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  /// Set when nothing was predicted positive; precision is then reported as 0.
  bool precision_undefined = false;
};

/// Predictions are score >= threshold.
ThresholdMetrics prf1(std::span<const ScoredExample> examples, double threshold);

/// A record in the benchmark test set.
struct EvalRecord {
  std::string record_id;
  std::string text;
  LabelVector gold;
};

/// Scores returned by an external moderation provider for one text, keyed by
/// the provider's own (normalised) category names.
struct ProviderScores {
  std::map<std::string, double> categories;
  /// Provider-supplied overall unsafe probability (LlamaGuard's first-token
  /// probability); when absent the binary score is the max over mapped
  /// category scores.
  std::optional<double> unsafe;
};

class ProviderClient {
 public:
  virtual ~ProviderClient() = default;
  virtual Provider provider() const = 0;
  /// Label used for the report row.
  virtual std::string system_name() const = 0;
  /// Throws on failure.
  virtual ProviderScores score(const std::string& text) = 0;
};

/// Append-only JSONL cache of provider responses keyed by
/// (provider, sha256(text)). Safe for concurrent use; writes are serialised.
class ProviderCache {
 public:
  /// Loads existing entries; the file is created on first append.
  explicit ProviderCache(std::string path);

  std::optional<ProviderScores> get(Provider provider, const std::string& text) const;
  void put(Provider provider, const std::string& text, const ProviderScores& scores);
  size_t size() const;

 private:
  std::string path_;
  mutable std::mutex mu_;
  std::map<std::pair<Provider, std::string>, ProviderScores> entries_;
};

/// Serves scores from the cache and falls back to `inner` on a miss. With no
/// inner client a miss is an error, which makes runs replayable offline.
class CachedProvider final : public ProviderClient {
 public:
  CachedProvider(Provider provider, std::string system_name, std::shared_ptr<ProviderCache> cache,
                 std::shared_ptr<ProviderClient> inner = nullptr);

  Provider provider() const override { return provider_; }
  std::string system_name() const override { return name_; }
  ProviderScores score(const std::string& text) override;

 private:
  Provider provider_;
  std::string name_;
  std::shared_ptr<ProviderCache> cache_;
  std::shared_ptr<ProviderClient> inner_;
};

struct ProviderEndpointConfig {
  Provider provider = Provider::kOpenAiModeration;
  std::string name;  // report row label
  std::string url;
  std::string auth_env_var;
  /// Perspective takes its key as a query parameter; others use a header.
  std::string auth_header = "Authorization";
  std::string auth_prefix = "Bearer ";
  int timeout_ms = 30000;
  int retry_budget = 2;
};

std::vector<ProviderEndpointConfig> parse_provider_configs(std::string_view json_text);

/// HTTP adapters:
///   openai_moderation: POST {"input": text} -> results[0].category_scores
///   perspective:       POST comments:analyze -> attributeScores.*.summaryScore.value
///   llamaguard:        POST {"text": text} -> {"unsafe_probability", "categories":{...}}
std::shared_ptr<ProviderClient> make_http_provider(const ProviderEndpointConfig& config);

/// Score a provider assigns to one of our targets, or nullopt when the
/// provider has no category mapped to it.
std::optional<double> provider_target_score(const ProviderScores& scores, Provider provider,
                                            const Target& target, const ProviderMapping& mapping);

/// Whether the provider can be compared on `target` at all.
bool provider_covers(Provider provider, const Target& target, const ProviderMapping& mapping);

/// One report cell.
struct ReportCell {
  enum class Status { kOk, kUnmapped, kNotApplicable, kFailed };
  Status status = Status::kOk;
  double pr_auc = 0.0;
  size_t n = 0;
  size_t n_pos = 0;
  size_t failures = 0;
  /// Precision/recall/F1 at `threshold` (the head's own threshold on
  /// calibrated scores; 0.5 for providers).
  std::optional<ThresholdMetrics> at_threshold;
  double threshold = 0.0;

  /// "0.819", "-", "n/a" or "failed(3)".
  std::string display() const;
};

struct EvalReport {
  std::vector<std::string> systems;  // row order
  std::map<std::string, std::map<std::string, ReportCell>> cells;  // system -> target -> cell
  std::string dataset_hash;
  std::string timestamp;

  const ReportCell& cell(const std::string& system, const Target& target) const;

  /// Columns: system,target,pr_auc,n,n_pos.
  std::string to_csv() const;
  /// Systems as rows; unsafe then the seven categories as columns, followed
  /// by a precision/recall/F1 table at each cell's threshold.
  std::string to_markdown() const;
};

/// Scores every record with each bundle head and each provider, then
/// computes PR-AUC per (system, target) over the records with a determined
/// gold label for that target. Local heads use raw scores.
/// `embeddings[i]` is the vector for `records[i]` (already normalised as the
/// bundle expects); a missing vector drops that record from local cells.
EvalReport benchmark_report(const ModelBundle& bundle, const std::string& bundle_name,
                            std::span<const EvalRecord> records,
                            std::span<const std::optional<EmbeddingVector>> embeddings,
                            std::span<const std::shared_ptr<ProviderClient>> providers,
                            const ProviderMapping& mapping, size_t max_in_flight = 8);

/// Rows of `dataset` (restricted to `split` when given) as evaluation records.
std::vector<EvalRecord> eval_records(const LabelledDataset& dataset, std::optional<Split> split);

/// Looks up each record's vector by record id; failures become nullopt.
/// Vectors are unit-normalised when `normalize` is set.
std::vector<std::optional<EmbeddingVector>> embed_records(std::span<const EvalRecord> records,
                                                          const Embedder& embedder, bool normalize);

/// Hash of the evaluation set (ids, texts and gold labels).
std::string dataset_hash(std::span<const EvalRecord> records);

}  // namespace localguard
