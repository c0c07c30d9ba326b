#include "localguard/llm_client.hpp"

#include <nlohmann/json.hpp>

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <optional>
#include <semaphore>
#include <thread>
#include <unordered_map>

#include "http_util.hpp"
#include "localguard/util.hpp"

namespace localguard {
namespace {

using nlohmann::json;

RequestShape parse_shape(const std::string& s) {
  if (s == "chat") return RequestShape::kChat;
  if (s == "anthropic") return RequestShape::kAnthropic;
  if (s == "text") return RequestShape::kText;
  throw std::invalid_argument("unknown request shape: " + s);
}

LlmEndpointConfig config_from_json(const json& j) {
  LlmEndpointConfig c;
  c.name = j.at("name").get<std::string>();
  c.base_url = j.at("base_url").get<std::string>();
  c.path = j.value("path", c.path);
  c.model = j.value("model", c.name);
  c.auth_env_var = j.value("auth_env_var", "");
  c.auth_header = j.value("auth_header", c.auth_header);
  c.auth_prefix = j.value("auth_prefix", c.auth_prefix);
  if (j.contains("headers")) c.extra_headers = j["headers"].get<std::map<std::string, std::string>>();
  if (j.contains("shape")) c.shape = parse_shape(j["shape"].get<std::string>());
  c.max_in_flight = j.value("max_in_flight", c.max_in_flight);
  c.timeout_ms = j.value("timeout_ms", c.timeout_ms);
  c.temperature = j.value("temperature", c.temperature);
  c.top_p = j.value("top_p", c.top_p);
  c.max_tokens = j.value("max_tokens", c.max_tokens);
  if (c.max_in_flight == 0) throw std::invalid_argument(c.name + ": max_in_flight must be >= 1");
  return c;
}

// One counting semaphore per model bounds its in-flight requests.
using Gate = std::counting_semaphore<1024>;

}  // namespace

std::vector<LlmEndpointConfig> parse_llm_configs(std::string_view json_text) {
  const auto doc = json::parse(json_text);
  const json& list = doc.is_array() ? doc : doc.at("providers");
  std::vector<LlmEndpointConfig> out;
  for (const auto& entry : list) out.push_back(config_from_json(entry));
  return out;
}

HttpLlmClient::HttpLlmClient(LlmEndpointConfig config) : config_(std::move(config)) {
  if (!config_.auth_env_var.empty()) {
    const char* secret = std::getenv(config_.auth_env_var.c_str());
    if (!secret) throw LlmError(config_.name + ": environment variable " + config_.auth_env_var + " is not set");
    auth_value_ = config_.auth_prefix + secret;
  }
}

std::string HttpLlmClient::complete(const std::string& prompt) {
  json body;
  switch (config_.shape) {
    case RequestShape::kChat:
      body = {{"model", config_.model},
              {"messages", json::array({{{"role", "user"}, {"content", prompt}}})},
              {"temperature", config_.temperature},
              {"top_p", config_.top_p}};
      break;
    case RequestShape::kAnthropic:
      body = {{"model", config_.model},
              {"max_tokens", config_.max_tokens},
              {"messages", json::array({{{"role", "user"}, {"content", prompt}}})},
              {"temperature", config_.temperature},
              {"top_p", config_.top_p}};
      break;
    case RequestShape::kText:
      body = {{"model", config_.model},
              {"prompt", prompt},
              {"temperature", config_.temperature},
              {"top_p", config_.top_p}};
      break;
  }

  const auto url = detail::split_url(config_.base_url);
  auto client = detail::make_client(url.origin, config_.timeout_ms);
  httplib::Headers headers;
  for (const auto& [k, v] : config_.extra_headers) headers.emplace(k, v);
  if (!auth_value_.empty()) headers.emplace(config_.auth_header, auth_value_);
  std::string path = url.path == "/" ? config_.path : url.path + config_.path;

  auto res = client->Post(path, headers, body.dump(), "application/json");
  if (!res) throw LlmError(config_.name + ": " + httplib::to_string(res.error()));
  if (res->status != 200) {
    throw LlmError(config_.name + ": HTTP " + std::to_string(res->status));
  }
  const auto reply = json::parse(res->body, nullptr, false);
  if (reply.is_discarded()) throw LlmError(config_.name + ": response is not JSON");
  try {
    switch (config_.shape) {
      case RequestShape::kChat:
        return reply.at("choices").at(0).at("message").at("content").get<std::string>();
      case RequestShape::kAnthropic:
        return reply.at("content").at(0).at("text").get<std::string>();
      case RequestShape::kText:
        return reply.at("text").get<std::string>();
    }
  } catch (const json::exception& e) {
    throw LlmError(config_.name + ": unexpected response layout: " + e.what());
  }
  return {};
}

LabelRun label_records(std::span<const TextRecord> records,
                       std::span<const std::shared_ptr<LlmClient>> models,
                       const LabelOptions& options) {
  const size_t n_models = models.size();
  const size_t n_jobs = records.size() * n_models;
  std::vector<std::optional<LlmVerdict>> slots(n_jobs);
  std::vector<std::string> errors(n_jobs);

  std::vector<std::unique_ptr<Gate>> gates;
  for (const auto& m : models) {
    gates.push_back(std::make_unique<Gate>(static_cast<std::ptrdiff_t>(std::max<size_t>(1, m->max_in_flight()))));
  }

  std::atomic<size_t> next{0};
  auto worker = [&] {
    for (size_t job = next++; job < n_jobs; job = next++) {
      const auto& record = records[job / n_models];
      const size_t m = job % n_models;
      LlmClient& model = *models[m];
      const std::string prompt = render_prompt(record.text, options.toggles);
      for (int attempt = 0; attempt <= options.retry_budget; ++attempt) {
        std::string reply;
        const auto start = std::chrono::steady_clock::now();
        gates[m]->acquire();
        try {
          reply = model.complete(prompt);
        } catch (const std::exception& e) {
          gates[m]->release();
          errors[job] = e.what();
          continue;
        }
        gates[m]->release();
        const double ms =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
        try {
          LlmVerdict verdict = parse_verdict(reply, model.model_id());
          verdict.latency_ms = ms;
          slots[job] = std::move(verdict);
          break;
        } catch (const ParseError& e) {
          errors[job] = e.what();
        }
      }
    }
  };
  const size_t n_threads = std::max<size_t>(1, std::min(options.max_in_flight, n_jobs));
  std::vector<std::thread> pool;
  for (size_t i = 0; i < n_threads; ++i) pool.emplace_back(worker);
  for (auto& t : pool) t.join();

  LabelRun run;
  for (size_t job = 0; job < n_jobs; ++job) {
    const auto& record = records[job / n_models];
    if (slots[job]) {
      run.verdicts.push_back({record.id, std::move(*slots[job])});
    } else {
      run.failures.push_back({record.id, models[job % n_models]->model_id(), errors[job]});
    }
  }
  return run;
}

std::vector<std::pair<std::string, std::vector<LlmVerdict>>> group_verdicts(
    std::span<const VerdictLogEntry> entries) {
  std::vector<std::pair<std::string, std::vector<LlmVerdict>>> out;
  std::unordered_map<std::string, size_t> slot;
  for (const auto& e : entries) {
    auto [it, inserted] = slot.emplace(e.record_id, out.size());
    if (inserted) out.emplace_back(e.record_id, std::vector<LlmVerdict>{});
    out[it->second].second.push_back(e.verdict);
  }
  return out;
}

AggregateRun aggregate_all(
    const std::vector<std::pair<std::string, std::vector<LlmVerdict>>>& grouped, Policy policy) {
  AggregateRun run;
  for (const auto& [id, verdicts] : grouped) {
    if (auto v = aggregate_ensemble(id, verdicts, policy)) {
      run.ensemble.push_back(std::move(*v));
    } else {
      run.unlabelled.push_back(id);
    }
  }
  return run;
}

}  // namespace localguard
