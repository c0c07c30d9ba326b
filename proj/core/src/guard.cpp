#include "localguard/guard.hpp"

#include <httplib.h>

#include <cmath>

namespace localguard {
namespace {

using nlohmann::json;

json head_json(const HeadResult& h) { return {{"score", h.score}, {"flagged", h.flagged}}; }

HeadResult head_from_json(const json& j) {
  return {j.at("score").get<double>(), j.at("flagged").get<bool>()};
}

json error_body(const std::string& message) { return {{"error", message}}; }

}  // namespace

json to_json(const ModerationResult& r) {
  json j = {{"index", r.index}, {"id", r.record_id}, {"model_version", r.model_version},
            {"embedding_source", std::string(embedding_source_name(r.embedding_source))}};
  if (!r.ok()) {
    j["error"] = r.error;
    return j;
  }
  j["binary"] = head_json(r.binary);
  json cats = json::object();
  for (Category c : kAllCategories) cats[std::string(category_name(c))] = head_json(r.categories[index_of(c)]);
  j["categories"] = std::move(cats);
  return j;
}

ModerationResult moderation_result_from_json(const json& j) {
  ModerationResult r;
  r.index = j.at("index").get<size_t>();
  r.record_id = j.at("id").get<std::string>();
  r.model_version = j.at("model_version").get<std::string>();
  const auto src = j.at("embedding_source").get<std::string>();
  r.embedding_source = src == "remote" ? EmbeddingSource::kRemote : EmbeddingSource::kStore;
  if (j.contains("error")) {
    r.error = j["error"].get<std::string>();
    return r;
  }
  r.binary = head_from_json(j.at("binary"));
  for (Category c : kAllCategories) {
    r.categories[index_of(c)] = head_from_json(j.at("categories").at(std::string(category_name(c))));
  }
  return r;
}

void ServiceConfig::validate() const {
  if (max_batch < 1) throw ConfigError("max_batch must be at least 1");
  if (port < 0 || port > 65535) throw ConfigError("port out of range: " + std::to_string(port));
  if (request_timeout_ms <= 0) throw ConfigError("request_timeout_ms must be positive");
  for (const auto& [name, value] : thresholds) {
    if (!Target::parse(name)) throw ConfigError("threshold for unknown target " + name);
    if (!(value >= 0.0 && value <= 1.0)) {
      throw ConfigError("threshold for " + name + " must lie in [0,1], got " + std::to_string(value));
    }
  }
}

std::array<double, kNumCategories + 1> effective_thresholds(const ModelBundle& bundle,
                                                            const ThresholdOverrides& overrides) {
  std::array<double, kNumCategories + 1> out{};
  const auto targets = all_targets();
  for (size_t i = 0; i < targets.size(); ++i) {
    out[i] = bundle.head(targets[i]).threshold;
  }
  for (const auto& [name, value] : overrides) {
    const auto t = Target::parse(name);
    if (!t) throw ConfigError("threshold for unknown target " + name);
    out[t->is_binary() ? 0 : 1 + index_of(*t->category)] = value;
  }
  return out;
}

std::vector<ModerationResult> moderate(std::span<const EmbedItem> items, const ModelBundle& bundle,
                                       const Embedder& embedder, const ThresholdOverrides& overrides) {
  if (embedder.dim() != bundle.embedding.dim) {
    throw ConfigError("embedder dim " + std::to_string(embedder.dim()) + " does not match bundle dim " +
                      std::to_string(bundle.embedding.dim));
  }
  const auto thresholds = effective_thresholds(bundle, overrides);
  const auto targets = all_targets();
  std::array<const Head*, kNumCategories + 1> heads{};
  for (size_t i = 0; i < targets.size(); ++i) heads[i] = &bundle.head(targets[i]);

  auto outcomes = embedder.embed(items);
  std::vector<ModerationResult> results(items.size());
  for (size_t i = 0; i < items.size(); ++i) {
    ModerationResult& r = results[i];
    r.index = i;
    r.record_id = items[i].id;
    r.model_version = bundle.version;
    r.embedding_source = embedder.source();
    auto& outcome = outcomes[i];
    if (!outcome.vector) {
      r.error = outcome.error.empty() ? "embedding failed" : outcome.error;
      continue;
    }
    try {
      EmbeddingVector v = std::move(*outcome.vector);
      if (v.dim() != bundle.embedding.dim) {
        throw ConfigError("embedding for " + items[i].id + " has dim " + std::to_string(v.dim()) +
                          ", bundle expects " + std::to_string(bundle.embedding.dim));
      }
      validate(v);
      if (bundle.embedding.normalized && !v.normalized) v = normalize(v);
      for (size_t h = 0; h < heads.size(); ++h) {
        const double s = heads[h]->score(v.values);
        if (!std::isfinite(s)) throw EmbeddingError("non-finite score");
        HeadResult hr{s, s >= thresholds[h]};
        if (h == 0) {
          r.binary = hr;
        } else {
          r.categories[h - 1] = hr;
        }
      }
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      r = ModerationResult{i, items[i].id, {}, {}, bundle.version, embedder.source(), e.what()};
    }
  }
  return results;
}

std::vector<ModerationResult> moderate(std::span<const std::string> texts, const ModelBundle& bundle,
                                       const Embedder& embedder, const ThresholdOverrides& overrides) {
  std::vector<EmbedItem> items;
  items.reserve(texts.size());
  for (const auto& t : texts) items.push_back({t, t});
  return moderate(items, bundle, embedder, overrides);
}

struct ModerationService::Impl {
  std::shared_ptr<const ModelBundle> bundle;
  std::shared_ptr<const Embedder> embedder;
  ServiceConfig config;
  httplib::Server server;
  ServiceMetrics metrics;
  std::atomic<bool> bound{false};
};

ModerationService::ModerationService(std::shared_ptr<const ModelBundle> bundle,
                                     std::shared_ptr<const Embedder> embedder, ServiceConfig config)
    : impl_(std::make_unique<Impl>()) {
  config.validate();
  bundle->check();
  if (embedder->dim() != bundle->embedding.dim) {
    throw ConfigError("embedder dim " + std::to_string(embedder->dim()) + " does not match bundle dim " +
                      std::to_string(bundle->embedding.dim));
  }
  effective_thresholds(*bundle, config.thresholds);
  impl_->bundle = std::move(bundle);
  impl_->embedder = std::move(embedder);
  impl_->config = std::move(config);

  auto& srv = impl_->server;
  const time_t sec = impl_->config.request_timeout_ms / 1000;
  const time_t usec = static_cast<time_t>(impl_->config.request_timeout_ms % 1000) * 1000;
  srv.set_read_timeout(sec, usec);
  srv.set_write_timeout(sec, usec);
  srv.Post("/v1/moderate", [this](const httplib::Request& req, httplib::Response& res) {
    auto [status, body] = handle_moderate(req.body);
    res.status = status;
    res.set_content(body.dump(), "application/json");
  });
  srv.Get("/v1/health", [this](const httplib::Request&, httplib::Response& res) {
    res.set_content(health().dump(), "application/json");
  });
  srv.Get("/v1/metrics", [this](const httplib::Request&, httplib::Response& res) {
    res.set_content(metrics_json().dump(), "application/json");
  });
}

ModerationService::~ModerationService() { stop(); }

int ModerationService::bind() {
  auto& srv = impl_->server;
  int port = impl_->config.port;
  if (port == 0) {
    port = srv.bind_to_any_port(impl_->config.host);
    if (port < 0) throw std::runtime_error("cannot bind " + impl_->config.host);
  } else if (!srv.bind_to_port(impl_->config.host, port)) {
    throw std::runtime_error("cannot bind " + impl_->config.host + ":" + std::to_string(port));
  }
  impl_->bound = true;
  return port;
}

void ModerationService::listen() {
  if (!impl_->bound) throw std::logic_error("ModerationService::listen before bind");
  impl_->server.listen_after_bind();
}

void ModerationService::stop() {
  if (impl_ && impl_->server.is_running()) impl_->server.stop();
}

bool ModerationService::running() const { return impl_->server.is_running(); }

std::pair<int, json> ModerationService::handle_moderate(const std::string& body) {
  impl_->metrics.requests++;
  json req;
  try {
    req = json::parse(body);
  } catch (const json::exception& e) {
    impl_->metrics.rejected++;
    return {400, error_body(std::string("invalid JSON: ") + e.what())};
  }
  if (!req.is_object() || !req.contains("texts") || !req["texts"].is_array()) {
    impl_->metrics.rejected++;
    return {400, error_body("body must be an object with a \"texts\" array")};
  }
  const auto& texts = req["texts"];
  const size_t limit = impl_->config.max_batch;
  if (texts.size() > limit) {
    impl_->metrics.rejected++;
    json err = error_body("batch of " + std::to_string(texts.size()) + " texts exceeds the limit of " +
                          std::to_string(limit));
    err["max_batch"] = limit;
    return {413, err};
  }
  const json* ids = nullptr;
  if (req.contains("ids")) {
    ids = &req["ids"];
    if (!ids->is_array() || ids->size() != texts.size()) {
      impl_->metrics.rejected++;
      return {400, error_body("\"ids\" must be an array the same length as \"texts\"")};
    }
  }
  std::vector<EmbedItem> items;
  items.reserve(texts.size());
  for (size_t i = 0; i < texts.size(); ++i) {
    if (!texts[i].is_string() || (ids && !(*ids)[i].is_string())) {
      impl_->metrics.rejected++;
      return {400, error_body("texts and ids must be strings")};
    }
    std::string text = texts[i].get<std::string>();
    std::string id = ids ? (*ids)[i].get<std::string>() : text;
    items.push_back({std::move(id), std::move(text)});
  }
  impl_->metrics.texts += items.size();
  std::vector<ModerationResult> results;
  try {
    results = moderate(items, *impl_->bundle, *impl_->embedder, impl_->config.thresholds);
  } catch (const std::exception& e) {
    return {500, error_body(e.what())};
  }
  json out = json::array();
  for (const auto& r : results) {
    if (!r.ok()) impl_->metrics.item_errors++;
    out.push_back(to_json(r));
  }
  return {200, json{{"results", std::move(out)}}};
}

json ModerationService::health() const {
  return {{"status", "ok"},
          {"model_version", impl_->bundle->version},
          {"embedding_source", std::string(embedding_source_name(impl_->embedder->source()))},
          {"dim", impl_->bundle->embedding.dim},
          {"max_batch", impl_->config.max_batch}};
}

json ModerationService::metrics_json() const {
  const auto& m = impl_->metrics;
  return {{"requests", m.requests.load()},
          {"texts", m.texts.load()},
          {"rejected", m.rejected.load()},
          {"item_errors", m.item_errors.load()}};
}

}  // namespace localguard
