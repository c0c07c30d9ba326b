#pragma once

#include <array>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "localguard/corpus.hpp"
#include "localguard/embedder.hpp"
#include "localguard/labeller.hpp"
#include "localguard/taxonomy.hpp"

namespace lgtest {

std::string source_dir();
std::string fixture_path(const std::string& rel);

/// Fresh empty directory under the system temp dir.
std::string temp_dir(const std::string& tag);

struct StubRequest {
  std::string body;
  std::map<std::string, std::string> headers;  // lowercase names

  std::string header(const std::string& lower_name) const {
    const auto it = headers.find(lower_name);
    return it == headers.end() ? std::string() : it->second;
  }
};

/// Local HTTP server on an ephemeral port, served from a background thread.
class StubServer {
 public:
  using Handler = std::function<std::pair<int, std::string>(const StubRequest& req)>;

  StubServer();
  ~StubServer();
  StubServer(const StubServer&) = delete;
  StubServer& operator=(const StubServer&) = delete;

  /// Register before start().
  void post(const std::string& path, Handler handler);
  void start();
  void stop();

  std::string url() const;  // http://127.0.0.1:<port>
  int port() const { return port_; }
  size_t hits() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  int port_ = 0;
};

std::pair<int, std::string> http_post(const std::string& url, const std::string& body);
std::pair<int, std::string> http_get(const std::string& url);

/// The generated synthetic corpus and its latent labels.
struct SyntheticFixture {
  std::vector<localguard::TextRecord> records;
  std::unordered_map<std::string, std::array<bool, localguard::kNumCategories>> truth;  // by id
  std::unordered_map<std::string, std::string> id_by_text;
};

const SyntheticFixture& synthetic_fixture();

/// Chat-completion stub for ensemble member `model` (0, 1 or 2). Model 0
/// reports the latent labels; models 1 and 2 flip a few votes; model 2 wraps
/// its JSON in prose and sends an unparseable first reply for some texts.
StubServer::Handler llm_stub(const SyntheticFixture& fx, int model);

/// 16-dim vector with the latent labels planted on dims 0..7 plus noise.
constexpr size_t kPlantedDim = 16;
localguard::EmbeddingVector planted_embedding(const SyntheticFixture& fx, const std::string& id);

/// POST {"texts":[...]} -> {"embeddings":[...]} using planted_embedding.
StubServer::Handler embedding_stub(const SyntheticFixture& fx);

/// The fixture as a labelled dataset with its latent labels as gold; record
/// k of each thread goes to train (k < 7), valid (k < 9) or test.
localguard::LabelledDataset truth_dataset(const SyntheticFixture& fx);

/// In-process embedder returning planted_embedding for each item id.
std::shared_ptr<localguard::Embedder> planted_embedder(const SyntheticFixture& fx);

uint64_t fnv1a(const std::string& s);

}  // namespace lgtest
