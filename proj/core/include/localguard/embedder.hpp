#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace localguard {

/// Dense text embedding. Values are finite; a normalized vector has unit L2
/// norm to within 1e-5.
struct EmbeddingVector {
  std::vector<float> values;
  bool normalized = false;

  size_t dim() const { return values.size(); }
};

class EmbeddingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Throws EmbeddingError if any value is NaN/Inf, or if `normalized` is set
/// and the norm is off by more than 1e-5.
void validate(const EmbeddingVector& v);

/// v / ||v||_2 with normalized = true. The norm is accumulated in double.
/// Throws EmbeddingError for a zero or non-finite vector.
EmbeddingVector normalize(const EmbeddingVector& v);

/// The store's file is malformed; `offset` is the byte where parsing failed.
class StoreCorruption : public EmbeddingError {
 public:
  StoreCorruption(const std::string& what, uint64_t offset)
      : EmbeddingError(what + " at byte offset " + std::to_string(offset)), offset_(offset) {}
  uint64_t offset() const { return offset_; }

 private:
  uint64_t offset_;
};

/// Read-only embedding file indexed by record id.
///
/// Layout: the magic line "LGEMB1\n", a JSON header line
/// {"dim":d,"count":n,"normalized":b}\n, then n records of
/// [u32 LE id_len][id bytes][d x f32 LE]. The file is indexed on open and
/// read with positional reads, so concurrent lookups are safe.
class EmbeddingStore {
 public:
  static constexpr std::string_view kMagic = "LGEMB1\n";

  /// Throws IoError when unreadable and StoreCorruption when malformed.
  static EmbeddingStore open(const std::string& path);

  /// Writes `vectors` (all of one dim) keyed by `ids`, in the given order.
  static void save(const std::string& path, std::span<const std::string> ids,
                   std::span<const EmbeddingVector> vectors, bool normalized);

  EmbeddingStore(EmbeddingStore&&) noexcept;
  EmbeddingStore& operator=(EmbeddingStore&&) noexcept;
  ~EmbeddingStore();

  size_t dim() const { return dim_; }
  size_t size() const { return ids_.size(); }
  bool normalized() const { return normalized_; }
  /// Ids in file order.
  const std::vector<std::string>& ids() const { return ids_; }
  bool contains(const std::string& id) const { return index_.count(id) > 0; }

  struct LookupResult {
    std::vector<EmbeddingVector> vectors;  // found ids, in request order
    std::vector<std::string> found;
    std::vector<std::string> misses;
  };

  LookupResult lookup(std::span<const std::string> ids) const;
  std::optional<EmbeddingVector> get(const std::string& id) const;

  /// Every vector, in file order.
  std::vector<EmbeddingVector> read_all() const;

 private:
  EmbeddingStore() = default;
  EmbeddingVector read_at(uint64_t offset) const;

  int fd_ = -1;
  std::string path_;
  size_t dim_ = 0;
  bool normalized_ = false;
  std::vector<std::string> ids_;
  std::unordered_map<std::string, uint64_t> index_;  // id -> offset of the vector payload
};

struct EmbeddingEndpointConfig {
  std::string url;  // full URL of the POST endpoint
  std::string auth_env_var;
  std::string auth_header = "Authorization";
  std::string auth_prefix = "Bearer ";
  size_t max_batch = 64;
  int timeout_ms = 30000;
  int retry_budget = 2;
  size_t max_in_flight = 8;
};

/// POSTs {"texts":[...]} and reads {"embeddings":[[...],...]}. Order is
/// preserved. Transport errors are retried `retry_budget` times; a
/// cardinality or dim mismatch is a protocol error and is not retried.
/// Throws EmbeddingError when texts exceed max_batch.
std::vector<EmbeddingVector> fetch_remote(std::span<const std::string> texts,
                                          const EmbeddingEndpointConfig& endpoint);

/// An item to embed: `id` keys store lookups, `text` feeds remote models.
struct EmbedItem {
  std::string id;
  std::string text;
};

enum class EmbeddingSource : uint8_t { kStore, kRemote };
std::string_view embedding_source_name(EmbeddingSource s);

/// Per-item outcome; exactly one of vector/error is set.
struct EmbedOutcome {
  std::optional<EmbeddingVector> vector;
  std::string error;
};

/// Source of embeddings for scoring.
class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual size_t dim() const = 0;
  virtual EmbeddingSource source() const = 0;
  virtual std::vector<EmbedOutcome> embed(std::span<const EmbedItem> items) const = 0;
};

class StoreEmbedder final : public Embedder {
 public:
  explicit StoreEmbedder(std::shared_ptr<const EmbeddingStore> store) : store_(std::move(store)) {}
  size_t dim() const override { return store_->dim(); }
  EmbeddingSource source() const override { return EmbeddingSource::kStore; }
  std::vector<EmbedOutcome> embed(std::span<const EmbedItem> items) const override;

 private:
  std::shared_ptr<const EmbeddingStore> store_;
};

class RemoteEmbedder final : public Embedder {
 public:
  RemoteEmbedder(EmbeddingEndpointConfig config, size_t dim) : config_(std::move(config)), dim_(dim) {}
  size_t dim() const override { return dim_; }
  EmbeddingSource source() const override { return EmbeddingSource::kRemote; }
  /// Batches by max_batch; a failed batch marks each of its items failed.
  std::vector<EmbedOutcome> embed(std::span<const EmbedItem> items) const override;

 private:
  EmbeddingEndpointConfig config_;
  size_t dim_;
};

/// Wraps a function; used for in-process models and tests.
class FunctionEmbedder final : public Embedder {
 public:
  using Fn = std::function<EmbeddingVector(const EmbedItem&)>;
  FunctionEmbedder(size_t dim, Fn fn, EmbeddingSource source = EmbeddingSource::kRemote)
      : dim_(dim), fn_(std::move(fn)), source_(source) {}
  size_t dim() const override { return dim_; }
  EmbeddingSource source() const override { return source_; }
  std::vector<EmbedOutcome> embed(std::span<const EmbedItem> items) const override;

 private:
  size_t dim_;
  Fn fn_;
  EmbeddingSource source_;
};

}  // namespace localguard
