#include "localguard/corpus.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <numeric>
#include <unordered_set>

#include "localguard/util.hpp"

namespace localguard {
namespace {

using nlohmann::json;

// Controversial topics and slang seen on Singapore forums. Duplicates in the
// source list are collapsed by the lexicon constructor.
const std::vector<std::string> kControversialTerms = {
    "ceca",      "ghey",        "tiong",       "abnn",
    "amdl",      "amdk",        "pinoy",       "jiuhu",
    "prc",       "indian",      "filipino",    "foreign",
    "angmo",     "spg",         "atb",         "chennai",
    "****",      "bbm",         "ft",          "fw",
    "transformer", "chink",     "bangla",      "yalam",
    "curry",     "piak",        "syt",         "fap",
    "pcc",       "nnp",         "pika",        " kkj",
    "abalone",   "asgm",        "btss",        "hmv",
    "humsup",    "milf",        "nekkid",      "nsfw",
    "ocb",       "okt",         "pcc",         "perbird",
    "tps",       "vpl",         "parang",      "slash",
    "punch",     "kick",        "shoot",       "buibui",
    "bbfa",      "cheesepie",   "gcp",         "diu lei",
    "ccb",       "siao",        "cheese pie",  "knn",
    "ccb",       "pcb",         "smlj",        "tiu",
    "rcp",       "asw",         "bus3rd",      "digger",
    "gcp",       "vape",        "weed",        "drug",
    "launder",   "wash money",  "377a",        "raeesah khan",
    "oxley",     "halimah",     "brownface",   "chinese privilege",
    "presidential election",    "ashlee",      "wuhan",
    "mahathir",  "pink dot",    "egg freezing", "kong hee",
    "schooling", "amos yee",    "kurt tay",
};

bool is_word_char(char c) {
  const auto u = static_cast<unsigned char>(c);
  return (u >= '0' && u <= '9') || (u >= 'a' && u <= 'z') || (u >= 'A' && u <= 'Z') || u == '_' ||
         u >= 0x80;
}

bool matches(const KeywordLexicon::Term& term, std::string_view folded) {
  if (term.mode == MatchMode::kSubstring) return folded.find(term.text) != std::string_view::npos;
  size_t pos = folded.find(term.text);
  while (pos != std::string_view::npos) {
    const size_t end = pos + term.text.size();
    const bool left_ok = pos == 0 || !is_word_char(folded[pos - 1]);
    const bool right_ok = end == folded.size() || !is_word_char(folded[end]);
    if (left_ok && right_ok) return true;
    pos = folded.find(term.text, pos + 1);
  }
  return false;
}

// Partial Fisher-Yates: picks `n` indices uniformly, returned sorted.
std::vector<size_t> choose(size_t population, size_t n, Rng& rng) {
  std::vector<size_t> idx(population);
  std::iota(idx.begin(), idx.end(), size_t{0});
  for (size_t i = 0; i < n; ++i) {
    const size_t j = i + static_cast<size_t>(rng.below(population - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(n);
  std::sort(idx.begin(), idx.end());
  return idx;
}

std::optional<std::string> validate_line(const json& obj, Source default_source, TextRecord& out) {
  if (!obj.is_object()) return "not a JSON object";
  for (const char* field : {"id", "thread_id", "text"}) {
    if (!obj.contains(field)) return std::string("missing field: ") + field;
    if (!obj[field].is_string()) return std::string("field is not a string: ") + field;
  }
  if (!obj.contains("timestamp")) return "missing field: timestamp";
  if (!obj["timestamp"].is_number_integer()) return "field is not an integer: timestamp";

  out.id = obj["id"].get<std::string>();
  out.thread_id = obj["thread_id"].get<std::string>();
  out.text = obj["text"].get<std::string>();
  out.timestamp = obj["timestamp"].get<int64_t>();
  out.source = default_source;
  if (obj.contains("source")) {
    if (!obj["source"].is_string()) return "field is not a string: source";
    const auto s = parse_source(obj["source"].get<std::string>());
    if (!s) return "unknown source: " + obj["source"].get<std::string>();
    out.source = *s;
  }
  if (out.id.empty()) return "empty id";
  if (out.thread_id.empty()) return "empty thread_id";
  if (trim(out.text).empty()) return "empty text";
  return std::nullopt;
}

}  // namespace

std::string_view source_name(Source s) {
  switch (s) {
    case Source::kForumA:
      return "forum_a";
    case Source::kForumB:
      return "forum_b";
    case Source::kOther:
      return "other";
  }
  return "other";
}

std::optional<Source> parse_source(std::string_view name) {
  const std::string key = fold_case(trim(name));
  if (key == "forum_a") return Source::kForumA;
  if (key == "forum_b") return Source::kForumB;
  if (key == "other") return Source::kOther;
  return std::nullopt;
}

IngestResult ingest_lines(const std::vector<std::string>& lines, Source default_source) {
  IngestResult result;
  std::unordered_set<std::string> seen;
  for (size_t i = 0; i < lines.size(); ++i) {
    const size_t line_no = i + 1;
    if (trim(lines[i]).empty()) continue;
    json obj;
    try {
      obj = json::parse(lines[i]);
    } catch (const json::parse_error& e) {
      result.rejects.push_back({line_no, std::string("invalid JSON: ") + e.what()});
      continue;
    }
    TextRecord record;
    if (auto reason = validate_line(obj, default_source, record)) {
      result.rejects.push_back({line_no, std::move(*reason)});
      continue;
    }
    if (!seen.insert(record.id).second) {
      std::cerr << "warning: line " << line_no << ": duplicate id '" << record.id
                << "' dropped\n";
      result.duplicate_ids.push_back(record.id);
      continue;
    }
    result.records.push_back(std::move(record));
  }
  return result;
}

IngestResult ingest_records(const std::string& path, Source default_source) {
  return ingest_lines(read_lines(path), default_source);
}

void write_records(const std::string& path, const std::vector<TextRecord>& records) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  for (const auto& r : records) {
    json obj = {{"id", r.id},
                {"thread_id", r.thread_id},
                {"source", source_name(r.source)},
                {"timestamp", r.timestamp},
                {"text", r.text}};
    out << obj.dump() << '\n';
  }
  if (!out) throw IoError("write failed: " + path);
}

void write_rejects(const std::string& path, const std::vector<IngestReject>& rejects) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  for (const auto& r : rejects) out << json{{"line", r.line}, {"reason", r.reason}}.dump() << '\n';
  if (!out) throw IoError("write failed: " + path);
}

KeywordLexicon::KeywordLexicon(const std::vector<std::string>& raw_terms) {
  for (const auto& t : raw_terms) add(t);
}

void KeywordLexicon::add(std::string_view raw_term) {
  Term term;
  term.mode = (!raw_term.empty() && raw_term.front() == ' ') ? MatchMode::kWordBoundary
                                                              : MatchMode::kSubstring;
  term.text = fold_case(trim(raw_term));
  if (term.text.empty()) throw std::invalid_argument("lexicon term is empty");
  const bool duplicate = std::any_of(terms_.begin(), terms_.end(),
                                     [&](const Term& t) { return t.text == term.text; });
  if (!duplicate) terms_.push_back(std::move(term));
}

KeywordLexicon KeywordLexicon::load(const std::string& path) {
  std::vector<std::string> raw;
  for (auto& line : read_lines(path)) {
    if (trim(line).empty() || line.front() == '#') continue;
    raw.push_back(std::move(line));
  }
  return KeywordLexicon(raw);
}

const KeywordLexicon& KeywordLexicon::builtin() {
  static const KeywordLexicon lexicon(kControversialTerms);
  return lexicon;
}

std::optional<std::string> KeywordLexicon::first_match(std::string_view text) const {
  const std::string folded = fold_case(text);
  for (const auto& term : terms_) {
    if (matches(term, folded)) return term.text;
  }
  return std::nullopt;
}

bool flag_controversial(const TextRecord& record, const KeywordLexicon& lexicon) {
  if (lexicon.empty()) throw std::invalid_argument("flag_controversial: lexicon is empty");
  if (record.text.empty()) return false;
  return lexicon.first_match(record.text).has_value();
}

std::vector<TextRecord> sample_pool(const std::vector<TextRecord>& records,
                                    const KeywordLexicon& lexicon, size_t n_flagged,
                                    size_t n_random, uint64_t seed) {
  std::vector<size_t> flagged;
  std::vector<size_t> unflagged;
  for (size_t i = 0; i < records.size(); ++i) {
    (flag_controversial(records[i], lexicon) ? flagged : unflagged).push_back(i);
  }
  if (flagged.size() < n_flagged) {
    throw InsufficientRecords("flagged stratum has " + std::to_string(flagged.size()) + " < " +
                              std::to_string(n_flagged));
  }
  if (unflagged.size() < n_random) {
    throw InsufficientRecords("unflagged stratum has " + std::to_string(unflagged.size()) +
                              " < " + std::to_string(n_random));
  }

  Rng rng(seed);
  std::vector<TextRecord> pool;
  pool.reserve(n_flagged + n_random);
  for (size_t k : choose(flagged.size(), n_flagged, rng)) pool.push_back(records[flagged[k]]);
  for (size_t k : choose(unflagged.size(), n_random, rng)) pool.push_back(records[unflagged[k]]);
  return pool;
}

std::string_view split_name(Split s) {
  switch (s) {
    case Split::kTrain:
      return "train";
    case Split::kValid:
      return "valid";
    case Split::kTest:
      return "test";
  }
  return "train";
}

std::optional<Split> parse_split(std::string_view name) {
  if (name == "train") return Split::kTrain;
  if (name == "valid") return Split::kValid;
  if (name == "test") return Split::kTest;
  return std::nullopt;
}

std::unordered_map<std::string, Split> SplitAssignment::as_map() const {
  std::unordered_map<std::string, Split> out;
  out.reserve(assignments.size());
  for (const auto& [id, s] : assignments) out.emplace(id, s);
  return out;
}

std::array<size_t, 3> SplitAssignment::counts() const {
  std::array<size_t, 3> c{};
  for (const auto& [id, s] : assignments) ++c[static_cast<size_t>(s)];
  return c;
}

SplitAssignment split_by_thread(const std::vector<TextRecord>& records, SplitRatios ratios,
                                uint64_t seed) {
  const auto r = ratios.as_array();
  if (records.empty()) throw std::invalid_argument("split_by_thread: no records");
  for (double x : r) {
    if (!(x > 0.0)) throw std::invalid_argument("split_by_thread: ratios must be positive");
  }
  if (std::abs(r[0] + r[1] + r[2] - 1.0) > 1e-9) {
    throw std::invalid_argument("split_by_thread: ratios must sum to 1");
  }

  // Threads in order of first appearance, so the shuffle is input-determined.
  std::vector<std::string> threads;
  std::unordered_map<std::string, size_t> thread_size;
  for (const auto& rec : records) {
    auto [it, inserted] = thread_size.emplace(rec.thread_id, 0);
    if (inserted) threads.push_back(rec.thread_id);
    ++it->second;
  }
  Rng rng(seed);
  rng.shuffle(threads);

  const double n = static_cast<double>(records.size());
  std::array<double, 3> target = {r[0] * n, r[1] * n, r[2] * n};
  std::array<size_t, 3> assigned{};
  std::unordered_map<std::string, Split> thread_split;
  SplitAssignment out;
  out.ratios = ratios;

  for (const auto& t : threads) {
    size_t best = 0;
    double best_deficit = target[0] - static_cast<double>(assigned[0]);
    for (size_t s = 1; s < 3; ++s) {
      const double deficit = target[s] - static_cast<double>(assigned[s]);
      if (deficit > best_deficit) {
        best = s;
        best_deficit = deficit;
      }
    }
    const size_t size = thread_size[t];
    if (static_cast<double>(size) > target[best]) {
      out.warnings.push_back("thread " + t + " (" + std::to_string(size) +
                             " records) exceeds the whole " +
                             std::string(split_name(static_cast<Split>(best))) + " target");
    }
    assigned[best] += size;
    thread_split[t] = static_cast<Split>(best);
  }
  for (size_t s = 0; s < 3; ++s) {
    if (assigned[s] == 0) {
      out.warnings.push_back(std::string(split_name(static_cast<Split>(s))) + " split is empty");
    }
  }

  out.assignments.reserve(records.size());
  for (const auto& rec : records) out.assignments.emplace_back(rec.id, thread_split[rec.thread_id]);
  return out;
}

void write_split(const std::string& path, const SplitAssignment& split) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  for (const auto& [id, s] : split.assignments) {
    out << json{{"id", id}, {"split", split_name(s)}}.dump() << '\n';
  }
  if (!out) throw IoError("write failed: " + path);
}

SplitAssignment read_split(const std::string& path) {
  SplitAssignment out;
  size_t line_no = 0;
  for (const auto& line : read_lines(path)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto obj = json::parse(line);
    const auto s = parse_split(obj.at("split").get<std::string>());
    if (!s) throw std::runtime_error(path + ":" + std::to_string(line_no) + ": bad split");
    out.assignments.emplace_back(obj.at("id").get<std::string>(), *s);
  }
  const auto c = out.counts();
  const double n = static_cast<double>(out.assignments.size());
  if (n > 0) out.ratios = {c[0] / n, c[1] / n, c[2] / n};
  return out;
}

}  // namespace localguard
