#include "localguard/eval.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <numeric>
#include <sstream>
#include <thread>

#include "http_util.hpp"
#include "localguard/util.hpp"

namespace localguard {
namespace {

using nlohmann::json;

json scores_to_json(const ProviderScores& s) {
  json obj = {{"categories", s.categories}};
  if (s.unsafe) obj["unsafe"] = *s.unsafe;
  return obj;
}

ProviderScores scores_from_json(const json& obj) {
  ProviderScores s;
  for (const auto& [k, v] : obj.at("categories").items()) {
    s.categories[normalize_provider_category(k)] = v.get<double>();
  }
  if (obj.contains("unsafe") && !obj["unsafe"].is_null()) s.unsafe = obj["unsafe"].get<double>();
  return s;
}

std::string utc_now() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

class HttpProvider final : public ProviderClient {
 public:
  explicit HttpProvider(ProviderEndpointConfig config) : config_(std::move(config)) {
    if (!config_.auth_env_var.empty()) {
      const char* secret = std::getenv(config_.auth_env_var.c_str());
      if (!secret) throw std::runtime_error(config_.name + ": environment variable " + config_.auth_env_var + " is not set");
      secret_ = secret;
    }
  }

  Provider provider() const override { return config_.provider; }
  std::string system_name() const override { return config_.name; }

  ProviderScores score(const std::string& text) override {
    const auto url = detail::split_url(config_.url);
    std::string path = url.path;
    httplib::Headers headers;
    json body;
    switch (config_.provider) {
      case Provider::kOpenAiModeration:
        body = {{"input", text}};
        break;
      case Provider::kPerspective: {
        json attrs = json::object();
        for (const char* a : {"TOXICITY", "IDENTITY_ATTACK", "INSULT", "PROFANITY", "THREAT"}) attrs[a] = json::object();
        body = {{"comment", {{"text", text}}}, {"requestedAttributes", attrs}};
        break;
      }
      case Provider::kLlamaGuard:
        body = {{"text", text}};
        break;
    }
    if (!secret_.empty()) {
      if (config_.provider == Provider::kPerspective) {
        path += (path.find('?') == std::string::npos ? "?key=" : "&key=") + secret_;
      } else {
        headers.emplace(config_.auth_header, config_.auth_prefix + secret_);
      }
    }

    std::string last_error;
    for (int attempt = 0; attempt <= config_.retry_budget; ++attempt) {
      auto client = detail::make_client(url.origin, config_.timeout_ms);
      auto res = client->Post(path, headers, body.dump(), "application/json");
      if (!res) {
        last_error = httplib::to_string(res.error());
        continue;
      }
      if (res->status != 200) {
        last_error = "HTTP " + std::to_string(res->status);
        continue;
      }
      return parse(json::parse(res->body));
    }
    throw std::runtime_error(config_.name + ": " + last_error);
  }

 private:
  ProviderScores parse(const json& reply) const {
    ProviderScores s;
    switch (config_.provider) {
      case Provider::kOpenAiModeration:
        for (const auto& [k, v] : reply.at("results").at(0).at("category_scores").items()) {
          s.categories[normalize_provider_category(k)] = v.get<double>();
        }
        break;
      case Provider::kPerspective:
        for (const auto& [k, v] : reply.at("attributeScores").items()) {
          s.categories[normalize_provider_category(k)] = v.at("summaryScore").at("value").get<double>();
        }
        break;
      case Provider::kLlamaGuard:
        if (reply.contains("categories")) {
          for (const auto& [k, v] : reply["categories"].items()) {
            s.categories[normalize_provider_category(k)] = v.get<double>();
          }
        }
        s.unsafe = reply.at("unsafe_probability").get<double>();
        break;
    }
    return s;
  }

  ProviderEndpointConfig config_;
  std::string secret_;
};

}  // namespace

double pr_auc(std::span<const ScoredExample> examples) {
  size_t total_pos = 0;
  for (const auto& e : examples) {
    if (!std::isfinite(e.score)) throw MetricError("non-finite score for " + e.record_id);
    if (e.gold != 0 && e.gold != 1) throw MetricError("gold label must be 0 or 1");
    total_pos += static_cast<size_t>(e.gold);
  }
  if (total_pos == 0) throw MetricError("no_positives");

  std::vector<size_t> order(examples.size());
  std::iota(order.begin(), order.end(), size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](size_t a, size_t b) { return examples[a].score > examples[b].score; });

  double ap = 0.0;
  double prev_recall = 0.0;
  size_t tp = 0, fp = 0;
  for (size_t i = 0; i < order.size();) {
    const double s = examples[order[i]].score;
    for (; i < order.size() && examples[order[i]].score == s; ++i) {
      (examples[order[i]].gold ? tp : fp) += 1;
    }
    const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
    const double recall = static_cast<double>(tp) / static_cast<double>(total_pos);
    ap += (recall - prev_recall) * precision;
    prev_recall = recall;
  }
  return ap;
}

ThresholdMetrics prf1(std::span<const ScoredExample> examples, double threshold) {
  if (!std::isfinite(threshold)) throw MetricError("threshold must be finite");
  size_t tp = 0, fp = 0, fn = 0, pos = 0;
  for (const auto& e : examples) {
    const bool predicted = e.score >= threshold;
    pos += static_cast<size_t>(e.gold);
    if (predicted && e.gold) ++tp;
    if (predicted && !e.gold) ++fp;
    if (!predicted && e.gold) ++fn;
  }
  if (pos == 0) throw MetricError("no_positives");
  ThresholdMetrics m;
  if (tp + fp == 0) {
    m.precision_undefined = true;
  } else {
    m.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
  }
  m.recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
  const double pr = m.precision + m.recall;
  m.f1 = pr > 0.0 ? 2.0 * m.precision * m.recall / pr : 0.0;
  return m;
}

ProviderCache::ProviderCache(std::string path) : path_(std::move(path)) {
  std::ifstream in(path_);
  if (!in) return;
  std::string line;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    const auto obj = json::parse(line);
    const auto provider = parse_provider(obj.at("provider").get<std::string>());
    if (!provider) continue;
    entries_[{*provider, obj.at("text_sha256").get<std::string>()}] = scores_from_json(obj.at("scores"));
  }
}

std::optional<ProviderScores> ProviderCache::get(Provider provider, const std::string& text) const {
  const auto key = std::make_pair(provider, sha256_hex(text));
  std::lock_guard lock(mu_);
  const auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

void ProviderCache::put(Provider provider, const std::string& text, const ProviderScores& scores) {
  const std::string hash = sha256_hex(text);
  const json line = {{"provider", provider_name(provider)}, {"text_sha256", hash}, {"scores", scores_to_json(scores)}};
  std::lock_guard lock(mu_);
  entries_[{provider, hash}] = scores;
  std::ofstream out(path_, std::ios::app);
  if (!out) throw IoError("cannot append to provider cache " + path_);
  out << line.dump() << '\n';
}

size_t ProviderCache::size() const {
  std::lock_guard lock(mu_);
  return entries_.size();
}

CachedProvider::CachedProvider(Provider provider, std::string system_name,
                               std::shared_ptr<ProviderCache> cache,
                               std::shared_ptr<ProviderClient> inner)
    : provider_(provider), name_(std::move(system_name)), cache_(std::move(cache)), inner_(std::move(inner)) {}

ProviderScores CachedProvider::score(const std::string& text) {
  if (auto hit = cache_->get(provider_, text)) return *hit;
  if (!inner_) throw std::runtime_error(name_ + ": no cached response and no live client");
  ProviderScores s = inner_->score(text);
  cache_->put(provider_, text, s);
  return s;
}

std::vector<ProviderEndpointConfig> parse_provider_configs(std::string_view json_text) {
  const auto doc = json::parse(json_text);
  const json& list = doc.is_array() ? doc : doc.at("providers");
  std::vector<ProviderEndpointConfig> out;
  for (const auto& j : list) {
    ProviderEndpointConfig c;
    const auto p = parse_provider(j.at("provider").get<std::string>());
    if (!p) throw std::invalid_argument("unknown provider " + j.at("provider").dump());
    c.provider = *p;
    c.name = j.value("name", std::string(provider_name(*p)));
    c.url = j.value("url", "");
    c.auth_env_var = j.value("auth_env_var", "");
    c.auth_header = j.value("auth_header", c.auth_header);
    c.auth_prefix = j.value("auth_prefix", c.auth_prefix);
    c.timeout_ms = j.value("timeout_ms", c.timeout_ms);
    c.retry_budget = j.value("retry_budget", c.retry_budget);
    out.push_back(std::move(c));
  }
  return out;
}

std::shared_ptr<ProviderClient> make_http_provider(const ProviderEndpointConfig& config) {
  return std::make_shared<HttpProvider>(config);
}

bool provider_covers(Provider provider, const Target& target, const ProviderMapping& mapping) {
  if (target.is_binary()) return true;
  return !mapping.sources_for(provider, *target.category).empty();
}

std::optional<double> provider_target_score(const ProviderScores& scores, Provider provider,
                                            const Target& target, const ProviderMapping& mapping) {
  if (target.is_binary()) {
    if (provider == Provider::kLlamaGuard && scores.unsafe) return scores.unsafe;
    std::optional<double> best;
    for (const auto& [name, value] : scores.categories) {
      if (mapping.map_all(provider, name).empty()) continue;
      best = best ? std::max(*best, value) : value;
    }
    if (!best && scores.unsafe) return scores.unsafe;
    return best;
  }
  std::optional<double> best;
  for (const auto& source : mapping.sources_for(provider, *target.category)) {
    const auto it = scores.categories.find(source);
    if (it == scores.categories.end()) continue;
    best = best ? std::max(*best, it->second) : it->second;
  }
  return best;
}

std::string ReportCell::display() const {
  switch (status) {
    case Status::kUnmapped:
      return "-";
    case Status::kNotApplicable:
      return "n/a";
    case Status::kFailed:
      return "failed(" + std::to_string(failures) + ")";
    case Status::kOk:
      break;
  }
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", pr_auc);
  return buf;
}

const ReportCell& EvalReport::cell(const std::string& system, const Target& target) const {
  return cells.at(system).at(target.name());
}

std::string EvalReport::to_csv() const {
  std::ostringstream out;
  out << "system,target,pr_auc,n,n_pos\n";
  for (const auto& system : systems) {
    for (const auto& t : all_targets()) {
      const auto& c = cell(system, t);
      out << system << ',' << t.name() << ',';
      if (c.status == ReportCell::Status::kOk) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.6f", c.pr_auc);
        out << buf;
      } else {
        out << c.display();
      }
      out << ',' << c.n << ',' << c.n_pos << '\n';
    }
  }
  return out.str();
}

std::string EvalReport::to_markdown() const {
  std::ostringstream out;
  out << "| System | unsafe | hateful | harassment | public harm | self-harm | sexual | toxic | violent |\n";
  out << "|---|---|---|---|---|---|---|---|---|\n";
  for (const auto& system : systems) {
    out << "| " << system;
    for (const auto& t : all_targets()) out << " | " << cell(system, t).display();
    out << " |\n";
  }
  out << "\n| System | Target | Threshold | Precision | Recall | F1 |\n|---|---|---|---|---|---|\n";
  for (const auto& system : systems) {
    for (const auto& t : all_targets()) {
      const auto& c = cell(system, t);
      if (!c.at_threshold) continue;
      char buf[128];
      std::snprintf(buf, sizeof buf, "| %s | %s | %.3f | %.3f%s | %.3f | %.3f |\n", system.c_str(), t.name().c_str(),
                    c.threshold, c.at_threshold->precision, c.at_threshold->precision_undefined ? "*" : "",
                    c.at_threshold->recall, c.at_threshold->f1);
      out << buf;
    }
  }
  out << "\nPR-AUC (step-interpolated average precision). * marks precision with no predicted positives. Dataset " << dataset_hash.substr(0, 12)
      << ", generated " << timestamp << ".\n";
  return out.str();
}

std::string dataset_hash(std::span<const EvalRecord> records) {
  std::string buf;
  for (const auto& r : records) {
    buf += r.record_id;
    buf += '\x1f';
    buf += r.text;
    buf += '\x1f';
    for (TriState s : r.gold.categories) buf += static_cast<char>('0' + static_cast<int>(s));
    buf += static_cast<char>('0' + static_cast<int>(r.gold.unsafe));
    buf += '\x1e';
  }
  return sha256_hex(buf);
}

std::vector<EvalRecord> eval_records(const LabelledDataset& dataset, std::optional<Split> split) {
  std::vector<EvalRecord> out;
  for (const auto& row : dataset.rows) {
    if (split && row.split != *split) continue;
    out.push_back({row.record_id, row.text, row.labels});
  }
  return out;
}

std::vector<std::optional<EmbeddingVector>> embed_records(std::span<const EvalRecord> records,
                                                          const Embedder& embedder, bool normalize_vectors) {
  std::vector<EmbedItem> items;
  items.reserve(records.size());
  for (const auto& r : records) items.push_back({r.record_id, r.text});
  auto outcomes = embedder.embed(items);
  std::vector<std::optional<EmbeddingVector>> out(records.size());
  for (size_t i = 0; i < records.size(); ++i) {
    if (!outcomes[i].vector) continue;
    try {
      validate(*outcomes[i].vector);
      out[i] = normalize_vectors && !outcomes[i].vector->normalized ? normalize(*outcomes[i].vector)
                                                                    : std::move(*outcomes[i].vector);
    } catch (const EmbeddingError&) {
    }
  }
  return out;
}

EvalReport benchmark_report(const ModelBundle& bundle, const std::string& bundle_name,
                            std::span<const EvalRecord> all_records,
                            std::span<const std::optional<EmbeddingVector>> embeddings,
                            std::span<const std::shared_ptr<ProviderClient>> providers,
                            const ProviderMapping& mapping, size_t max_in_flight) {
  if (embeddings.size() != all_records.size()) {
    throw std::invalid_argument("benchmark_report: one embedding slot per record is required");
  }
  // Every system is scored on the same records: those with an embedding.
  std::vector<size_t> kept;
  for (size_t i = 0; i < all_records.size(); ++i) {
    if (embeddings[i]) kept.push_back(i);
  }
  std::vector<EvalRecord> records;
  for (size_t i : kept) records.push_back(all_records[i]);

  EvalReport report;
  report.dataset_hash = dataset_hash(records);
  report.timestamp = utc_now();

  auto gold_of = [](const EvalRecord& r, const Target& t) {
    return t.is_binary() ? r.gold.unsafe : r.gold.at(*t.category);
  };
  auto finish_cell = [](const std::vector<ScoredExample>& examples,
                        const std::vector<ScoredExample>& calibrated, double threshold) {
    ReportCell c;
    c.n = examples.size();
    c.threshold = threshold;
    for (const auto& e : examples) c.n_pos += static_cast<size_t>(e.gold);
    if (c.n_pos == 0) {
      c.status = ReportCell::Status::kNotApplicable;
      return c;
    }
    c.pr_auc = pr_auc(examples);
    c.at_threshold = prf1(calibrated, threshold);
    return c;
  };

  report.systems.push_back(bundle_name);
  for (const auto& t : all_targets()) {
    const Head& head = bundle.head(t);
    std::vector<ScoredExample> examples, calibrated;
    for (size_t k = 0; k < records.size(); ++k) {
      const TriState g = gold_of(records[k], t);
      if (g == TriState::kUndetermined) continue;
      const double raw = head.raw_score(embeddings[kept[k]]->values);
      const int gold = g == TriState::kYes ? 1 : 0;
      examples.push_back({records[k].record_id, raw, gold});
      calibrated.push_back({records[k].record_id, head.calibrate(raw), gold});
    }
    report.cells[bundle_name][t.name()] = finish_cell(examples, calibrated, head.threshold);
  }

  for (const auto& provider : providers) {
    const std::string name = provider->system_name();
    std::vector<std::optional<ProviderScores>> scores(records.size());
    std::atomic<size_t> next{0};
    auto worker = [&] {
      for (size_t k = next++; k < records.size(); k = next++) {
        try {
          scores[k] = provider->score(records[k].text);
        } catch (const std::exception&) {
        }
      }
    };
    const size_t n_threads = std::max<size_t>(1, std::min(max_in_flight, records.size()));
    if (n_threads == 1) {
      worker();
    } else {
      std::vector<std::thread> pool;
      for (size_t i = 0; i < n_threads; ++i) pool.emplace_back(worker);
      for (auto& th : pool) th.join();
    }

    report.systems.push_back(name);
    for (const auto& t : all_targets()) {
      ReportCell cell;
      if (!provider_covers(provider->provider(), t, mapping)) {
        cell.status = ReportCell::Status::kUnmapped;
        report.cells[name][t.name()] = cell;
        continue;
      }
      std::vector<ScoredExample> examples;
      size_t failures = 0;
      for (size_t k = 0; k < records.size(); ++k) {
        const TriState g = gold_of(records[k], t);
        if (g == TriState::kUndetermined) continue;
        std::optional<double> s;
        if (scores[k]) s = provider_target_score(*scores[k], provider->provider(), t, mapping);
        if (!s) {
          ++failures;
          continue;
        }
        examples.push_back({records[k].record_id, *s, g == TriState::kYes ? 1 : 0});
      }
      if (failures > 0) {
        cell.status = ReportCell::Status::kFailed;
        cell.failures = failures;
        cell.n = examples.size() + failures;
      } else {
        cell = finish_cell(examples, examples, 0.5);
      }
      report.cells[name][t.name()] = cell;
    }
  }
  return report;
}

}  // namespace localguard
