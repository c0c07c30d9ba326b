#pragma once

#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "localguard/corpus.hpp"
#include "localguard/labeller.hpp"
#include "localguard/prompt.hpp"

namespace localguard {

/// Request/response layout spoken by an endpoint.
///   chat:      {"model","messages":[{"role":"user","content":P}],...} -> choices[0].message.content
///   anthropic: {"model","max_tokens","messages":[...]}                -> content[0].text
///   text:      {"model","prompt",...}                                  -> "text"
enum class RequestShape : uint8_t { kChat, kAnthropic, kText };

struct LlmEndpointConfig {
  std::string name;  // model id recorded in verdict logs
  std::string base_url;
  std::string path = "/v1/chat/completions";
  std::string model;
  std::string auth_env_var;  // secret is read from the environment, never from config
  std::string auth_header = "Authorization";
  std::string auth_prefix = "Bearer ";
  std::map<std::string, std::string> extra_headers;
  RequestShape shape = RequestShape::kChat;
  size_t max_in_flight = 8;
  int timeout_ms = 60000;
  double temperature = 0.0;
  double top_p = 1.0;
  int max_tokens = 2048;
};

/// Parses {"providers":[{name, base_url, ...}, ...]} or a bare array.
std::vector<LlmEndpointConfig> parse_llm_configs(std::string_view json_text);

class LlmError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A text-in/text-out model endpoint.
class LlmClient {
 public:
  virtual ~LlmClient() = default;
  virtual const std::string& model_id() const = 0;
  virtual size_t max_in_flight() const { return 8; }
  /// Returns the model's text reply. Throws LlmError on transport failure.
  virtual std::string complete(const std::string& prompt) = 0;
};

class HttpLlmClient final : public LlmClient {
 public:
  explicit HttpLlmClient(LlmEndpointConfig config);

  const std::string& model_id() const override { return config_.name; }
  size_t max_in_flight() const override { return config_.max_in_flight; }
  std::string complete(const std::string& prompt) override;

  const LlmEndpointConfig& config() const { return config_; }

 private:
  LlmEndpointConfig config_;
  std::string auth_value_;
};

struct LabelOptions {
  PromptToggles toggles;
  /// Extra attempts after a failed call or unparseable reply.
  int retry_budget = 2;
  /// Upper bound on concurrent requests across all models.
  size_t max_in_flight = 8;
};

struct LabelFailure {
  std::string record_id;
  std::string model_id;
  std::string reason;
};

struct LabelRun {
  /// Record order, then model order.
  std::vector<VerdictLogEntry> verdicts;
  std::vector<LabelFailure> failures;
};

/// Sends every record to every model and parses the replies. A model's
/// verdict for a record is dropped after 1 + retry_budget failed attempts.
LabelRun label_records(std::span<const TextRecord> records,
                       std::span<const std::shared_ptr<LlmClient>> models,
                       const LabelOptions& options = {});

struct AggregateRun {
  std::vector<EnsembleVerdict> ensemble;
  std::vector<std::string> unlabelled;  // fewer than two valid verdicts
};

AggregateRun aggregate_all(
    const std::vector<std::pair<std::string, std::vector<LlmVerdict>>>& grouped, Policy policy);

/// Groups a label run's verdicts by record, in record order.
std::vector<std::pair<std::string, std::vector<LlmVerdict>>> group_verdicts(
    std::span<const VerdictLogEntry> entries);

}  // namespace localguard
