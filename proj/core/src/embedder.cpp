#include "localguard/embedder.hpp"

#include <fcntl.h>
#include <sys/stat.h>
#include <unistd.h>

#include <nlohmann/json.hpp>

#include <atomic>
#include <bit>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <thread>

#include "http_util.hpp"
#include "localguard/util.hpp"

namespace localguard {
namespace {

using nlohmann::json;

void put_u32(std::string& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

uint32_t get_u32(const unsigned char* p) {
  return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
         (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
}

bool read_exact(int fd, void* buf, size_t len, uint64_t offset) {
  auto* p = static_cast<char*>(buf);
  while (len > 0) {
    const ssize_t n = ::pread(fd, p, len, static_cast<off_t>(offset));
    if (n <= 0) return false;
    p += n;
    len -= static_cast<size_t>(n);
    offset += static_cast<uint64_t>(n);
  }
  return true;
}

EmbeddingVector decode_values(const unsigned char* p, size_t dim, bool normalized) {
  EmbeddingVector v;
  v.normalized = normalized;
  v.values.resize(dim);
  for (size_t i = 0; i < dim; ++i) v.values[i] = std::bit_cast<float>(get_u32(p + 4 * i));
  return v;
}

}  // namespace

void validate(const EmbeddingVector& v) {
  double sq = 0.0;
  for (float x : v.values) {
    if (!std::isfinite(x)) throw EmbeddingError("embedding contains a non-finite value");
    sq += static_cast<double>(x) * x;
  }
  if (v.normalized && std::abs(std::sqrt(sq) - 1.0) > 1e-5) {
    throw EmbeddingError("embedding marked normalized has norm " + std::to_string(std::sqrt(sq)));
  }
}

EmbeddingVector normalize(const EmbeddingVector& v) {
  double sq = 0.0;
  for (float x : v.values) {
    if (!std::isfinite(x)) throw EmbeddingError("normalize: non-finite value");
    sq += static_cast<double>(x) * x;
  }
  if (!(sq > 0.0)) throw EmbeddingError("normalize: zero vector");
  const double norm = std::sqrt(sq);
  EmbeddingVector out;
  out.normalized = true;
  out.values.resize(v.values.size());
  for (size_t i = 0; i < v.values.size(); ++i) {
    out.values[i] = static_cast<float>(static_cast<double>(v.values[i]) / norm);
  }
  return out;
}

EmbeddingStore::EmbeddingStore(EmbeddingStore&& other) noexcept
    : fd_(std::exchange(other.fd_, -1)),
      path_(std::move(other.path_)),
      dim_(other.dim_),
      normalized_(other.normalized_),
      ids_(std::move(other.ids_)),
      index_(std::move(other.index_)) {}

EmbeddingStore& EmbeddingStore::operator=(EmbeddingStore&& other) noexcept {
  if (this != &other) {
    if (fd_ >= 0) ::close(fd_);
    fd_ = std::exchange(other.fd_, -1);
    path_ = std::move(other.path_);
    dim_ = other.dim_;
    normalized_ = other.normalized_;
    ids_ = std::move(other.ids_);
    index_ = std::move(other.index_);
  }
  return *this;
}

EmbeddingStore::~EmbeddingStore() {
  if (fd_ >= 0) ::close(fd_);
}

EmbeddingStore EmbeddingStore::open(const std::string& path) {
  EmbeddingStore store;
  store.path_ = path;
  store.fd_ = ::open(path.c_str(), O_RDONLY | O_CLOEXEC);
  if (store.fd_ < 0) throw IoError("cannot open embedding store " + path);
  struct stat st {};
  if (::fstat(store.fd_, &st) != 0) throw IoError("cannot stat " + path);
  const uint64_t file_size = static_cast<uint64_t>(st.st_size);

  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open embedding store " + path);
  std::string magic(kMagic.size(), '\0');
  if (!in.read(magic.data(), static_cast<std::streamsize>(magic.size())) || magic != kMagic) {
    throw StoreCorruption("bad magic in " + path, 0);
  }
  std::string header_line;
  if (!std::getline(in, header_line)) throw StoreCorruption("missing header in " + path, kMagic.size());
  uint64_t offset = kMagic.size() + header_line.size() + 1;
  const auto header = json::parse(header_line, nullptr, false);
  if (header.is_discarded() || !header.is_object() || !header.contains("dim") ||
      !header.contains("count") || !header.contains("normalized")) {
    throw StoreCorruption("malformed header in " + path, kMagic.size());
  }
  store.dim_ = header["dim"].get<size_t>();
  store.normalized_ = header["normalized"].get<bool>();
  const size_t count = header["count"].get<size_t>();
  if (store.dim_ == 0) throw StoreCorruption("header dim is zero in " + path, kMagic.size());

  const uint64_t payload = 4ull * store.dim_;
  store.ids_.reserve(count);
  store.index_.reserve(count);
  unsigned char len_buf[4];
  for (size_t i = 0; i < count; ++i) {
    const uint64_t record_start = offset;
    if (offset + 4 > file_size || !in.read(reinterpret_cast<char*>(len_buf), 4)) {
      throw StoreCorruption("truncated record " + std::to_string(i) + " in " + path, record_start);
    }
    const uint32_t id_len = get_u32(len_buf);
    offset += 4;
    if (offset + id_len + payload > file_size) {
      throw StoreCorruption("record " + std::to_string(i) + " length mismatch in " + path, record_start);
    }
    std::string id(id_len, '\0');
    in.read(id.data(), id_len);
    offset += id_len;
    if (!store.index_.emplace(id, offset).second) {
      throw StoreCorruption("duplicate id '" + id + "' in " + path, record_start);
    }
    store.ids_.push_back(std::move(id));
    in.seekg(static_cast<std::streamoff>(payload), std::ios::cur);
    offset += payload;
  }
  if (offset != file_size) throw StoreCorruption("trailing bytes after last record in " + path, offset);
  return store;
}

void EmbeddingStore::save(const std::string& path, std::span<const std::string> ids,
                          std::span<const EmbeddingVector> vectors, bool normalized) {
  if (ids.size() != vectors.size()) throw std::invalid_argument("EmbeddingStore::save: ids/vectors size mismatch");
  if (vectors.empty()) throw std::invalid_argument("EmbeddingStore::save: no vectors");
  const size_t dim = vectors.front().dim();
  if (dim == 0) throw std::invalid_argument("EmbeddingStore::save: zero dim");

  nlohmann::ordered_json header;
  header["dim"] = dim;
  header["count"] = vectors.size();
  header["normalized"] = normalized;

  std::string buf(kMagic);
  buf += header.dump();
  buf += '\n';
  for (size_t i = 0; i < vectors.size(); ++i) {
    if (vectors[i].dim() != dim) throw std::invalid_argument("EmbeddingStore::save: mixed dims");
    put_u32(buf, static_cast<uint32_t>(ids[i].size()));
    buf += ids[i];
    for (float x : vectors[i].values) put_u32(buf, std::bit_cast<uint32_t>(x));
  }
  write_file(path, buf);
}

EmbeddingVector EmbeddingStore::read_at(uint64_t offset) const {
  std::vector<unsigned char> buf(4 * dim_);
  if (!read_exact(fd_, buf.data(), buf.size(), offset)) {
    throw StoreCorruption("short read in " + path_, offset);
  }
  return decode_values(buf.data(), dim_, normalized_);
}

std::optional<EmbeddingVector> EmbeddingStore::get(const std::string& id) const {
  const auto it = index_.find(id);
  if (it == index_.end()) return std::nullopt;
  return read_at(it->second);
}

EmbeddingStore::LookupResult EmbeddingStore::lookup(std::span<const std::string> ids) const {
  LookupResult out;
  for (const auto& id : ids) {
    const auto it = index_.find(id);
    if (it == index_.end()) {
      out.misses.push_back(id);
      continue;
    }
    out.vectors.push_back(read_at(it->second));
    out.found.push_back(id);
  }
  return out;
}

std::vector<EmbeddingVector> EmbeddingStore::read_all() const {
  std::vector<EmbeddingVector> out;
  out.reserve(ids_.size());
  for (const auto& id : ids_) out.push_back(read_at(index_.at(id)));
  return out;
}

std::vector<EmbeddingVector> fetch_remote(std::span<const std::string> texts,
                                          const EmbeddingEndpointConfig& endpoint) {
  if (texts.empty()) return {};
  if (texts.size() > endpoint.max_batch) {
    throw EmbeddingError("batch of " + std::to_string(texts.size()) + " exceeds max_batch " +
                         std::to_string(endpoint.max_batch));
  }
  const auto url = detail::split_url(endpoint.url);
  httplib::Headers headers;
  if (!endpoint.auth_env_var.empty()) {
    const char* secret = std::getenv(endpoint.auth_env_var.c_str());
    if (!secret) throw EmbeddingError("environment variable " + endpoint.auth_env_var + " is not set");
    headers.emplace(endpoint.auth_header, endpoint.auth_prefix + secret);
  }
  const std::string body = json{{"texts", std::vector<std::string>(texts.begin(), texts.end())}}.dump();

  std::string last_error;
  for (int attempt = 0; attempt <= endpoint.retry_budget; ++attempt) {
    auto client = detail::make_client(url.origin, endpoint.timeout_ms);
    auto res = client->Post(url.path, headers, body, "application/json");
    if (!res) {
      last_error = httplib::to_string(res.error());
      continue;
    }
    if (res->status != 200) {
      last_error = "HTTP " + std::to_string(res->status);
      continue;
    }
    const auto reply = json::parse(res->body, nullptr, false);
    if (reply.is_discarded() || !reply.contains("embeddings") || !reply["embeddings"].is_array()) {
      throw EmbeddingError("embedding protocol error: response lacks an embeddings array");
    }
    const auto& rows = reply["embeddings"];
    if (rows.size() != texts.size()) {
      throw EmbeddingError("embedding protocol error: " + std::to_string(rows.size()) +
                           " vectors for " + std::to_string(texts.size()) + " texts");
    }
    std::vector<EmbeddingVector> out;
    out.reserve(rows.size());
    for (const auto& row : rows) {
      EmbeddingVector v;
      v.values = row.get<std::vector<float>>();
      if (v.dim() == 0 || (!out.empty() && v.dim() != out.front().dim())) {
        throw EmbeddingError("embedding protocol error: inconsistent dim within batch");
      }
      validate(v);
      out.push_back(std::move(v));
    }
    return out;
  }
  throw EmbeddingError("embedding endpoint failed after retries: " + last_error);
}

std::string_view embedding_source_name(EmbeddingSource s) {
  return s == EmbeddingSource::kStore ? "store" : "remote";
}

std::vector<EmbedOutcome> StoreEmbedder::embed(std::span<const EmbedItem> items) const {
  std::vector<EmbedOutcome> out(items.size());
  for (size_t i = 0; i < items.size(); ++i) {
    try {
      if (auto v = store_->get(items[i].id)) {
        out[i].vector = std::move(*v);
      } else {
        out[i].error = "id not in embedding store: " + items[i].id;
      }
    } catch (const std::exception& e) {
      out[i].error = e.what();
    }
  }
  return out;
}

std::vector<EmbedOutcome> RemoteEmbedder::embed(std::span<const EmbedItem> items) const {
  std::vector<EmbedOutcome> out(items.size());
  const size_t batch = std::max<size_t>(1, config_.max_batch);
  const size_t n_batches = (items.size() + batch - 1) / batch;
  std::atomic<size_t> next{0};
  auto worker = [&] {
    for (size_t b = next++; b < n_batches; b = next++) {
      const size_t lo = b * batch;
      const size_t hi = std::min(items.size(), lo + batch);
      std::vector<std::string> texts;
      for (size_t i = lo; i < hi; ++i) texts.push_back(items[i].text);
      try {
        auto vectors = fetch_remote(texts, config_);
        for (size_t i = lo; i < hi; ++i) {
          if (dim_ != 0 && vectors[i - lo].dim() != dim_) {
            out[i].error = "embedding dim " + std::to_string(vectors[i - lo].dim()) +
                           " does not match expected " + std::to_string(dim_);
          } else {
            out[i].vector = std::move(vectors[i - lo]);
          }
        }
      } catch (const std::exception& e) {
        for (size_t i = lo; i < hi; ++i) out[i].error = e.what();
      }
    }
  };
  const size_t n_threads = std::min(std::max<size_t>(1, config_.max_in_flight), n_batches);
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (size_t i = 0; i < n_threads; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  return out;
}

std::vector<EmbedOutcome> FunctionEmbedder::embed(std::span<const EmbedItem> items) const {
  std::vector<EmbedOutcome> out(items.size());
  for (size_t i = 0; i < items.size(); ++i) {
    try {
      out[i].vector = fn_(items[i]);
    } catch (const std::exception& e) {
      out[i].error = e.what();
    }
  }
  return out;
}

}  // namespace localguard
