#pragma once

#include <array>
#include <atomic>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "localguard/bundle.hpp"
#include "localguard/embedder.hpp"
#include "localguard/taxonomy.hpp"

namespace localguard {

/// Misconfiguration that makes serving impossible (bad thresholds, dim mismatch).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct HeadResult {
  double score = 0.0;
  bool flagged = false;
  bool operator==(const HeadResult&) const = default;
};

struct ModerationResult {
  size_t index = 0;
  std::string record_id;
  HeadResult binary;
  std::array<HeadResult, kNumCategories> categories{};
  std::string model_version;
  EmbeddingSource embedding_source = EmbeddingSource::kStore;
  /// Non-empty when embedding failed; scores are then absent.
  std::string error;

  bool ok() const { return error.empty(); }
  bool operator==(const ModerationResult&) const = default;
};

nlohmann::json to_json(const ModerationResult& r);
ModerationResult moderation_result_from_json(const nlohmann::json& j);

/// Per-target threshold overrides keyed by target name ("unsafe", "toxic", ...).
using ThresholdOverrides = std::map<std::string, double>;

struct ServiceConfig {
  std::string bundle_path;
  std::string store_path;      // one of store_path / embedding.url is set
  EmbeddingEndpointConfig embedding;
  std::string host = "127.0.0.1";
  int port = 8080;
  size_t max_batch = 64;
  ThresholdOverrides thresholds;
  int request_timeout_ms = 30000;

  /// Throws ConfigError: thresholds outside [0,1], unknown targets, max_batch 0.
  void validate() const;
};

/// Effective threshold for each head after overrides; binary first.
std::array<double, kNumCategories + 1> effective_thresholds(const ModelBundle& bundle,
                                                            const ThresholdOverrides& overrides);

/// Embeds each item (normalising when the bundle expects unit vectors),
/// scores all eight heads and applies thresholds. Order-preserving. An
/// embedding failure yields an error entry for that item only. Throws
/// ConfigError when the embedder's dim differs from the bundle's.
std::vector<ModerationResult> moderate(std::span<const EmbedItem> items, const ModelBundle& bundle,
                                       const Embedder& embedder,
                                       const ThresholdOverrides& overrides = {});

/// Texts double as lookup ids.
std::vector<ModerationResult> moderate(std::span<const std::string> texts, const ModelBundle& bundle,
                                       const Embedder& embedder,
                                       const ThresholdOverrides& overrides = {});

struct ServiceMetrics {
  std::atomic<uint64_t> requests{0};
  std::atomic<uint64_t> texts{0};
  std::atomic<uint64_t> rejected{0};
  std::atomic<uint64_t> item_errors{0};
};

/// HTTP front end over an immutable bundle:
///   POST /v1/moderate {"texts":[...], "ids":[...]?} -> {"results":[...]}
///   GET  /v1/health -> {"status":"ok","model_version":...}
///   GET  /v1/metrics -> counters
class ModerationService {
 public:
  /// Checks the config and the bundle/embedder dims; throws ConfigError.
  ModerationService(std::shared_ptr<const ModelBundle> bundle, std::shared_ptr<const Embedder> embedder,
                    ServiceConfig config);
  ~ModerationService();

  ModerationService(const ModerationService&) = delete;
  ModerationService& operator=(const ModerationService&) = delete;

  /// Binds; port 0 picks a free port. Throws std::runtime_error when the
  /// address is unavailable. Returns the bound port.
  int bind();
  /// Serves until stop(). Requires bind().
  void listen();
  /// Stops accepting; in-flight requests complete.
  void stop();
  bool running() const;

  /// Handler logic without the socket, used by tests and the HTTP routes.
  /// Returns (status, body).
  std::pair<int, nlohmann::json> handle_moderate(const std::string& body);
  nlohmann::json health() const;
  nlohmann::json metrics_json() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace localguard
