#include "localguard/config.hpp"

#include <nlohmann/json.hpp>

#include "localguard/util.hpp"

namespace localguard {

using nlohmann::json;

AppConfig parse_config(std::string_view json_text) {
  const json doc = json::parse(json_text);
  if (!doc.is_object()) throw std::invalid_argument("config must be a JSON object");
  AppConfig c;

  if (doc.contains("corpus")) {
    const auto& j = doc["corpus"];
    c.lexicon_path = j.value("lexicon", c.lexicon_path);
    c.n_flagged = j.value("n_flagged", c.n_flagged);
    c.n_random = j.value("n_random", c.n_random);
    c.sample_seed = j.value("seed", c.sample_seed);
  }
  if (doc.contains("split")) {
    const auto& j = doc["split"];
    c.split.train = j.value("train", c.split.train);
    c.split.valid = j.value("valid", c.split.valid);
    c.split.test = j.value("test", c.split.test);
    c.split_seed = j.value("seed", c.split_seed);
  }
  if (doc.contains("llm")) {
    const auto& j = doc["llm"];
    if (j.contains("providers")) c.llm = parse_llm_configs(j["providers"].dump());
    if (j.contains("policy")) {
      const auto p = parse_policy(j["policy"].get<std::string>());
      if (!p) throw std::invalid_argument("unknown policy " + j["policy"].dump());
      c.policy = *p;
    }
    c.label.retry_budget = j.value("retry_budget", c.label.retry_budget);
    c.label.max_in_flight = j.value("max_in_flight", c.label.max_in_flight);
    if (j.contains("prompt")) {
      const auto& p = j["prompt"];
      c.label.toggles.context = p.value("context", c.label.toggles.context);
      c.label.toggles.fewshot = p.value("fewshot", c.label.toggles.fewshot);
      c.label.toggles.cot = p.value("cot", c.label.toggles.cot);
    }
  }
  if (doc.contains("embedding")) {
    const auto& j = doc["embedding"];
    c.embedding.url = j.value("url", c.embedding.url);
    c.embedding.auth_env_var = j.value("auth_env_var", c.embedding.auth_env_var);
    c.embedding.auth_header = j.value("auth_header", c.embedding.auth_header);
    c.embedding.auth_prefix = j.value("auth_prefix", c.embedding.auth_prefix);
    c.embedding.max_batch = j.value("max_batch", c.embedding.max_batch);
    c.embedding.timeout_ms = j.value("timeout_ms", c.embedding.timeout_ms);
    c.embedding.retry_budget = j.value("retry_budget", c.embedding.retry_budget);
    c.embedding.max_in_flight = j.value("max_in_flight", c.embedding.max_in_flight);
    c.embedding_dim = j.value("dim", c.embedding_dim);
    c.store_path = j.value("store", c.store_path);
  }
  if (doc.contains("classifier")) {
    const auto& j = doc["classifier"];
    const std::string kind = j.value("kind", "ridge");
    if (kind == "ridge") {
      c.train.kind = HeadKind::kRidge;
    } else if (kind == "nn") {
      c.train.kind = HeadKind::kNeural;
    } else {
      throw std::invalid_argument("classifier.kind must be ridge or nn");
    }
    c.train.alpha = j.value("alpha", c.train.alpha);
    c.train.calibrate = j.value("calibrate", c.train.calibrate);
    c.train.version = j.value("version", c.train.version);
    if (j.contains("nn")) {
      const auto& n = j["nn"];
      c.train.nn.epochs = n.value("epochs", c.train.nn.epochs);
      c.train.nn.batch = n.value("batch", c.train.nn.batch);
      c.train.nn.lr = n.value("lr", c.train.nn.lr);
      c.train.nn.hidden = n.value("hidden", c.train.nn.hidden);
      c.train.nn.dropout = n.value("dropout", c.train.nn.dropout);
      c.train.nn.seed = n.value("seed", c.train.nn.seed);
    }
  }
  if (doc.contains("service")) {
    const auto& j = doc["service"];
    c.service.bundle_path = j.value("bundle", c.service.bundle_path);
    c.service.host = j.value("host", c.service.host);
    c.service.port = j.value("port", c.service.port);
    c.service.max_batch = j.value("max_batch", c.service.max_batch);
    c.service.request_timeout_ms = j.value("request_timeout_ms", c.service.request_timeout_ms);
    if (j.contains("thresholds")) {
      for (const auto& [k, v] : j["thresholds"].items()) c.service.thresholds[k] = v.get<double>();
    }
  }
  c.service.store_path = c.store_path;
  c.service.embedding = c.embedding;
  if (doc.contains("benchmark")) {
    const auto& j = doc["benchmark"];
    if (j.contains("providers")) c.providers = parse_provider_configs(j["providers"].dump());
    c.provider_cache = j.value("cache", c.provider_cache);
    c.mapping_path = j.value("mapping", c.mapping_path);
    c.benchmark_max_in_flight = j.value("max_in_flight", c.benchmark_max_in_flight);
  }
  return c;
}

AppConfig load_config(const std::string& path) { return parse_config(read_file(path)); }

}  // namespace localguard
