#include "localguard/labeller.hpp"

#include <nlohmann/json.hpp>

#include <fstream>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "localguard/util.hpp"

namespace localguard {
namespace {

using nlohmann::json;

std::string parse_error_code(ParseError::Kind kind, const std::string& detail) {
  switch (kind) {
    case ParseError::Kind::kNoJson:
      return "no_json";
    case ParseError::Kind::kMissing:
      return "missing:" + detail;
    case ParseError::Kind::kBadLabel:
      return "bad_label:" + detail;
    case ParseError::Kind::kBadReason:
      return "bad_reason:" + detail;
  }
  return "parse_error";
}

// Returns the end (exclusive) of the brace-balanced span starting at `open`,
// honouring JSON string literals, or npos if unbalanced.
size_t balanced_end(std::string_view s, size_t open) {
  int depth = 0;
  bool in_string = false;
  bool escaped = false;
  for (size_t i = open; i < s.size(); ++i) {
    const char c = s[i];
    if (in_string) {
      if (escaped) {
        escaped = false;
      } else if (c == '\\') {
        escaped = true;
      } else if (c == '"') {
        in_string = false;
      }
      continue;
    }
    if (c == '"') {
      in_string = true;
    } else if (c == '{') {
      ++depth;
    } else if (c == '}') {
      if (--depth == 0) return i + 1;
    }
  }
  return std::string_view::npos;
}

std::optional<json> first_json_object(std::string_view raw) {
  for (size_t pos = raw.find('{'); pos != std::string_view::npos; pos = raw.find('{', pos + 1)) {
    const size_t end = balanced_end(raw, pos);
    if (end == std::string_view::npos) continue;
    auto parsed = json::parse(raw.substr(pos, end - pos), nullptr, /*allow_exceptions=*/false);
    if (!parsed.is_discarded() && parsed.is_object()) return parsed;
  }
  return std::nullopt;
}

std::optional<Category> criterion_key(std::string_view key) {
  std::string k = fold_case(trim(key));
  constexpr std::string_view kPrefix = "encouraging ";
  if (k.rfind(kPrefix, 0) == 0) k.erase(0, kPrefix.size());
  return parse_category(k);
}

const json* find_ci(const json& obj, std::string_view name) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (fold_case(it.key()) == name) return &it.value();
  }
  return nullptr;
}

json votes_json(const std::vector<bool>& votes) {
  json arr = json::array();
  for (bool v : votes) arr.push_back(v);
  return arr;
}

CategoryAggregate aggregate_from_json(const json& obj) {
  CategoryAggregate agg;
  const auto state = parse_tri_state(obj.at("state").get<std::string>());
  if (!state) throw std::runtime_error("ensemble: bad state");
  agg.state = *state;
  for (const auto& v : obj.at("votes")) agg.votes.push_back(v.get<bool>());
  return agg;
}

json labels_json(const LabelVector& labels) {
  json cats = json::object();
  for (Category c : kAllCategories) {
    cats[std::string(category_name(c))] = tri_state_name(labels.at(c));
  }
  return cats;
}

}  // namespace

bool LlmVerdict::binary() const {
  for (const auto& v : votes) {
    if (v.yes) return true;
  }
  return false;
}

ParseError::ParseError(Kind kind, std::string detail)
    : std::runtime_error(parse_error_code(kind, detail)), kind_(kind), detail_(std::move(detail)) {}

LlmVerdict parse_verdict(std::string_view raw, std::string model_id) {
  const auto obj = first_json_object(raw);
  if (!obj) throw ParseError(ParseError::Kind::kNoJson, "");

  std::array<const json*, kNumCategories> found{};
  for (auto it = obj->begin(); it != obj->end(); ++it) {
    if (const auto c = criterion_key(it.key())) {
      if (!found[index_of(*c)]) found[index_of(*c)] = &it.value();
    }
  }

  LlmVerdict verdict;
  verdict.model_id = std::move(model_id);
  verdict.raw = std::string(raw);
  for (Category c : kAllCategories) {
    const std::string name(category_name(c));
    const json* entry = found[index_of(c)];
    if (!entry) throw ParseError(ParseError::Kind::kMissing, name);
    if (!entry->is_object()) throw ParseError(ParseError::Kind::kBadLabel, name);
    const json* label = find_ci(*entry, "label");
    if (!label || !label->is_string()) throw ParseError(ParseError::Kind::kBadLabel, name);
    const std::string value = fold_case(trim(label->get<std::string>()));
    if (value != "yes" && value != "no") throw ParseError(ParseError::Kind::kBadLabel, name);
    const json* reason = find_ci(*entry, "reason");
    if (!reason || !reason->is_string()) throw ParseError(ParseError::Kind::kBadReason, name);
    verdict.votes[index_of(c)] = {value == "yes", reason->get<std::string>()};
  }
  return verdict;
}

std::string_view policy_name(Policy p) {
  return p == Policy::kMajority ? "majority" : "consensus";
}

std::optional<Policy> parse_policy(std::string_view name) {
  const std::string key = fold_case(trim(name));
  if (key == "majority") return Policy::kMajority;
  if (key == "consensus") return Policy::kConsensus;
  return std::nullopt;
}

TriState aggregate_votes(const std::vector<bool>& votes, Policy policy) {
  size_t yes = 0;
  for (bool v : votes) yes += v ? 1 : 0;
  const size_t no = votes.size() - yes;
  if (votes.empty()) return TriState::kUndetermined;
  if (policy == Policy::kConsensus) {
    if (no == 0) return TriState::kYes;
    if (yes == 0) return TriState::kNo;
    return TriState::kUndetermined;
  }
  if (2 * yes > votes.size()) return TriState::kYes;
  if (2 * no > votes.size()) return TriState::kNo;
  return TriState::kUndetermined;
}

LabelVector EnsembleVerdict::labels() const {
  LabelVector out;
  for (size_t i = 0; i < kNumCategories; ++i) out.categories[i] = categories[i].state;
  out.unsafe = binary.state;
  return out;
}

std::optional<EnsembleVerdict> aggregate_ensemble(std::string record_id,
                                                  std::span<const LlmVerdict> verdicts,
                                                  Policy policy) {
  if (verdicts.size() < 2) return std::nullopt;
  EnsembleVerdict out;
  out.record_id = std::move(record_id);
  out.policy = policy;
  out.n_models = verdicts.size();
  for (const auto& v : verdicts) out.model_ids.push_back(v.model_id);

  for (size_t c = 0; c < kNumCategories; ++c) {
    auto& agg = out.categories[c];
    agg.votes.reserve(verdicts.size());
    for (const auto& v : verdicts) agg.votes.push_back(v.votes[c].yes);
    agg.state = aggregate_votes(agg.votes, policy);
  }
  for (const auto& v : verdicts) out.binary.votes.push_back(v.binary());
  out.binary.state = aggregate_votes(out.binary.votes, policy);
  return out;
}

double agreement_rate(const std::vector<std::vector<bool>>& vote_sets) {
  if (vote_sets.empty()) throw std::invalid_argument("agreement_rate: no records");
  size_t unanimous = 0;
  for (const auto& votes : vote_sets) {
    if (votes.size() < 2) throw std::invalid_argument("agreement_rate: record with fewer than 2 votes");
    bool same = true;
    for (bool v : votes) same = same && (v == votes.front());
    if (same) ++unanimous;
  }
  return static_cast<double>(unanimous) / static_cast<double>(vote_sets.size());
}

namespace {

// Expert files may give labels as booleans or as "yes"/"no"/"undetermined".
std::optional<TriState> json_tri_state(const json& v) {
  if (v.is_boolean()) return v.get<bool>() ? TriState::kYes : TriState::kNo;
  if (v.is_string()) return parse_tri_state(v.get<std::string>());
  return std::nullopt;
}

}  // namespace

ExpertSet load_expert_set(const std::string& path) {
  ExpertSet out;
  size_t line_no = 0;
  for (const auto& line : read_lines(path)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto obj = json::parse(line);
    ExpertEntry e;
    e.record_id = obj.at("id").get<std::string>();
    const auto unsafe = json_tri_state(obj.at("unsafe"));
    if (!unsafe || *unsafe == TriState::kUndetermined) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) +
                               ": expert entry needs a yes/no unsafe label");
    }
    e.gold.unsafe = *unsafe;
    e.gold.categories.fill(TriState::kUndetermined);
    if (obj.contains("categories")) {
      for (const auto& [name, state] : obj["categories"].items()) {
        const auto c = parse_category(name);
        const auto s = json_tri_state(state);
        if (c && s) e.gold.categories[index_of(*c)] = *s;
      }
    }
    out.push_back(std::move(e));
  }
  return out;
}

BinaryScores score_against_expert(std::span<const EnsembleVerdict> ensemble, const ExpertSet& gold) {
  std::unordered_map<std::string, bool> gold_unsafe;
  for (const auto& g : gold) {
    if (g.gold.unsafe == TriState::kUndetermined) {
      throw std::invalid_argument("expert set entry " + g.record_id + " lacks a binary label");
    }
    gold_unsafe[g.record_id] = g.gold.unsafe == TriState::kYes;
  }

  BinaryScores out;
  size_t tp = 0, fp = 0, fn = 0;
  for (const auto& v : ensemble) {
    const auto it = gold_unsafe.find(v.record_id);
    if (it == gold_unsafe.end()) {
      throw std::invalid_argument("expert set does not cover record " + v.record_id);
    }
    if (v.binary.state == TriState::kUndetermined) {
      ++out.n_undetermined;
      continue;
    }
    ++out.n_scored;
    const bool predicted = v.binary.state == TriState::kYes;
    if (predicted && it->second) ++tp;
    if (predicted && !it->second) ++fp;
    if (!predicted && it->second) ++fn;
  }
  if (out.n_scored == 0) throw std::invalid_argument("score_against_expert: no determined records");

  out.precision = (tp + fp) ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
  out.recall = (tp + fn) ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
  const double pr = out.precision + out.recall;
  out.f1 = pr > 0.0 ? 2.0 * out.precision * out.recall / pr : 0.0;
  return out;
}

double TargetStats::positive_pct() const {
  return determined() ? 100.0 * static_cast<double>(positives) / static_cast<double>(determined())
                      : 0.0;
}

double TargetStats::consensus_rate() const {
  const size_t total = determined() + undetermined;
  return total ? static_cast<double>(determined()) / static_cast<double>(total) : 0.0;
}

const TargetStats& DatasetStats::at(const Target& t) const {
  return t.is_binary() ? binary : categories[index_of(*t.category)];
}

std::string DatasetStats::to_markdown() const {
  std::ostringstream out;
  out << "| Category | Positive labels | Consensus rate |\n";
  out << "|---|---|---|\n";
  char buf[128];
  auto row = [&](const std::string& name, const TargetStats& s) {
    std::snprintf(buf, sizeof buf, "| %s | %zu (%.2f%%) | %.1f%% |\n", name.c_str(), s.positives,
                  s.positive_pct(), 100.0 * s.consensus_rate());
    out << buf;
  };
  for (Category c : kAllCategories) row(std::string(category_name(c)), categories[index_of(c)]);
  row("unsafe", binary);
  std::snprintf(buf, sizeof buf, "\nRecords: %zu (train %zu / valid %zu / test %zu)\n", n_records,
                split_counts[0], split_counts[1], split_counts[2]);
  out << buf;
  std::snprintf(buf, sizeof buf, "Reference, full-scale corpus: unsafe %zu,%03zu (%.2f%%), toxic %zu,%03zu (%.2f%%)\n",
                ReferenceCounts::kUnsafePositives / 1000, ReferenceCounts::kUnsafePositives % 1000,
                ReferenceCounts::kUnsafePct, ReferenceCounts::kToxicPositives / 1000,
                ReferenceCounts::kToxicPositives % 1000, ReferenceCounts::kToxicPct);
  out << buf;
  return out.str();
}

DatasetStats compute_stats(const LabelledDataset& dataset) {
  DatasetStats stats;
  stats.n_records = dataset.rows.size();
  auto bump = [](TargetStats& s, TriState state) {
    switch (state) {
      case TriState::kYes:
        ++s.positives;
        break;
      case TriState::kNo:
        ++s.negatives;
        break;
      case TriState::kUndetermined:
        ++s.undetermined;
        break;
    }
  };
  for (const auto& row : dataset.rows) {
    for (size_t c = 0; c < kNumCategories; ++c) bump(stats.categories[c], row.labels.categories[c]);
    bump(stats.binary, row.labels.unsafe);
    ++stats.split_counts[static_cast<size_t>(row.split)];
  }
  return stats;
}

CompiledDataset compile_dataset(std::span<const EnsembleVerdict> ensemble,
                                std::span<const TextRecord> records, const SplitAssignment& split) {
  std::unordered_map<std::string, const TextRecord*> by_id;
  for (const auto& r : records) by_id.emplace(r.id, &r);
  const auto split_map = split.as_map();

  CompiledDataset out;
  out.dataset.rows.reserve(ensemble.size());
  for (const auto& v : ensemble) {
    const auto rec = by_id.find(v.record_id);
    if (rec == by_id.end()) throw std::invalid_argument("no record for verdict " + v.record_id);
    const auto s = split_map.find(v.record_id);
    if (s == split_map.end()) throw std::invalid_argument("no split for record " + v.record_id);
    out.dataset.rows.push_back(
        {v.record_id, rec->second->thread_id, rec->second->text, s->second, v.labels()});
  }
  out.stats = compute_stats(out.dataset);
  return out;
}

void save_dataset(const std::string& path, const LabelledDataset& dataset) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  for (const auto& row : dataset.rows) {
    json obj = {{"id", row.record_id},
                {"thread_id", row.thread_id},
                {"split", split_name(row.split)},
                {"labels", labels_json(row.labels)},
                {"unsafe", tri_state_name(row.labels.unsafe)},
                {"text", row.text}};
    out << obj.dump() << '\n';
  }
  if (!out) throw IoError("write failed: " + path);
}

LabelledDataset load_dataset(const std::string& path) {
  LabelledDataset out;
  size_t line_no = 0;
  for (const auto& line : read_lines(path)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto obj = json::parse(line);
    LabelledRow row;
    row.record_id = obj.at("id").get<std::string>();
    row.thread_id = obj.value("thread_id", "");
    row.text = obj.value("text", "");
    const auto s = parse_split(obj.at("split").get<std::string>());
    if (!s) throw std::runtime_error(path + ":" + std::to_string(line_no) + ": bad split");
    row.split = *s;
    for (Category c : kAllCategories) {
      const auto state = parse_tri_state(obj.at("labels").at(std::string(category_name(c))).get<std::string>());
      if (!state) throw std::runtime_error(path + ":" + std::to_string(line_no) + ": bad label");
      row.labels.categories[index_of(c)] = *state;
    }
    const auto unsafe = json_tri_state(obj.at("unsafe"));
    if (!unsafe) throw std::runtime_error(path + ":" + std::to_string(line_no) + ": bad unsafe");
    row.labels.unsafe = *unsafe;
    out.rows.push_back(std::move(row));
  }
  return out;
}

void write_verdict_log(const std::string& path, std::span<const VerdictLogEntry> entries) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  for (const auto& e : entries) {
    json labels = json::object();
    json reasons = json::object();
    for (Category c : kAllCategories) {
      const auto& v = e.verdict.votes[index_of(c)];
      labels[std::string(category_name(c))] = v.yes ? "Yes" : "No";
      reasons[std::string(category_name(c))] = v.reason;
    }
    json obj = {{"record_id", e.record_id},
                {"model_id", e.verdict.model_id},
                {"labels", labels},
                {"reasons", reasons},
                {"raw_sha256", sha256_hex(e.verdict.raw)}};
    out << obj.dump() << '\n';
  }
  if (!out) throw IoError("write failed: " + path);
}

std::vector<std::pair<std::string, std::vector<LlmVerdict>>> read_verdict_log(const std::string& path) {
  std::vector<std::pair<std::string, std::vector<LlmVerdict>>> out;
  std::unordered_map<std::string, size_t> slot;
  for (const auto& line : read_lines(path)) {
    if (trim(line).empty()) continue;
    const auto obj = json::parse(line);
    LlmVerdict v;
    v.model_id = obj.at("model_id").get<std::string>();
    for (Category c : kAllCategories) {
      const std::string name(category_name(c));
      v.votes[index_of(c)].yes = fold_case(obj.at("labels").at(name).get<std::string>()) == "yes";
      if (obj.contains("reasons") && obj["reasons"].contains(name)) {
        v.votes[index_of(c)].reason = obj["reasons"][name].get<std::string>();
      }
    }
    const std::string id = obj.at("record_id").get<std::string>();
    auto [it, inserted] = slot.emplace(id, out.size());
    if (inserted) out.emplace_back(id, std::vector<LlmVerdict>{});
    out[it->second].second.push_back(std::move(v));
  }
  return out;
}

void write_ensemble(const std::string& path, std::span<const EnsembleVerdict> ensemble) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  for (const auto& v : ensemble) {
    json cats = json::object();
    for (Category c : kAllCategories) {
      const auto& agg = v.categories[index_of(c)];
      cats[std::string(category_name(c))] = {{"state", tri_state_name(agg.state)},
                                             {"votes", votes_json(agg.votes)}};
    }
    json obj = {{"record_id", v.record_id},
                {"policy", policy_name(v.policy)},
                {"n_models", v.n_models},
                {"model_ids", v.model_ids},
                {"categories", cats},
                {"unsafe", {{"state", tri_state_name(v.binary.state)},
                            {"votes", votes_json(v.binary.votes)}}}};
    out << obj.dump() << '\n';
  }
  if (!out) throw IoError("write failed: " + path);
}

std::vector<EnsembleVerdict> read_ensemble(const std::string& path) {
  std::vector<EnsembleVerdict> out;
  for (const auto& line : read_lines(path)) {
    if (trim(line).empty()) continue;
    const auto obj = json::parse(line);
    EnsembleVerdict v;
    v.record_id = obj.at("record_id").get<std::string>();
    const auto policy = parse_policy(obj.at("policy").get<std::string>());
    if (!policy) throw std::runtime_error("ensemble: bad policy");
    v.policy = *policy;
    v.n_models = obj.at("n_models").get<size_t>();
    v.model_ids = obj.value("model_ids", std::vector<std::string>{});
    for (Category c : kAllCategories) {
      v.categories[index_of(c)] = aggregate_from_json(obj.at("categories").at(std::string(category_name(c))));
    }
    v.binary = aggregate_from_json(obj.at("unsafe"));
    out.push_back(std::move(v));
  }
  return out;
}

}  // namespace localguard
