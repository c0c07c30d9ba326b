#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace localguard {

enum class Source : uint8_t { kForumA, kForumB, kOther };

std::string_view source_name(Source s);
std::optional<Source> parse_source(std::string_view name);

/// One corpus comment; the unit of labelling and splitting.
struct TextRecord {
  std::string id;
  std::string thread_id;
  Source source = Source::kOther;
  int64_t timestamp = 0;  // UTC seconds since epoch
  std::string text;
};

struct IngestReject {
  size_t line = 0;  // 1-based
  std::string reason;
};

struct IngestResult {
  std::vector<TextRecord> records;
  std::vector<IngestReject> rejects;
  /// Ids of records dropped because an earlier line used the same id.
  std::vector<std::string> duplicate_ids;
};

/// Reads a JSONL corpus file. `default_source` applies to lines without a
/// "source" field. Malformed lines go to `rejects`; the first occurrence of
/// an id wins. Throws IoError when the file cannot be read.
IngestResult ingest_records(const std::string& path, Source default_source);

/// Same as ingest_records but over in-memory lines (line numbers 1-based).
IngestResult ingest_lines(const std::vector<std::string>& lines, Source default_source);

void write_records(const std::string& path, const std::vector<TextRecord>& records);
void write_rejects(const std::string& path, const std::vector<IngestReject>& rejects);

enum class MatchMode : uint8_t { kSubstring, kWordBoundary };

/// Controversial-topic keyword list used to pick likely-unsafe comments.
class KeywordLexicon {
 public:
  struct Term {
    std::string text;  // lowercase
    MatchMode mode = MatchMode::kSubstring;
  };

  KeywordLexicon() = default;
  /// Terms are case-folded and deduplicated (first occurrence wins). A term
  /// written with a leading space (" kkj") is stored trimmed in word-boundary
  /// mode. Empty terms throw std::invalid_argument.
  explicit KeywordLexicon(const std::vector<std::string>& raw_terms);

  /// One term per line; blank lines and lines starting with '#' are skipped.
  static KeywordLexicon load(const std::string& path);

  /// The default controversial-topic list for Singapore forums.
  static const KeywordLexicon& builtin();

  const std::vector<Term>& terms() const { return terms_; }
  bool empty() const { return terms_.empty(); }
  size_t size() const { return terms_.size(); }

  /// Adds a term unless already present.
  void add(std::string_view raw_term);

  /// First matching term, if any.
  std::optional<std::string> first_match(std::string_view text) const;

 private:
  std::vector<Term> terms_;
};

/// True iff any term matches the case-folded text. Throws
/// std::invalid_argument when the lexicon is empty.
bool flag_controversial(const TextRecord& record, const KeywordLexicon& lexicon);

/// Thrown when a sampling stratum is too small.
class InsufficientRecords : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Draws `n_flagged` records uniformly from the lexicon-flagged stratum and
/// `n_random` from the rest. Output lists the flagged sample first, each
/// stratum in input order.
std::vector<TextRecord> sample_pool(const std::vector<TextRecord>& records,
                                    const KeywordLexicon& lexicon, size_t n_flagged,
                                    size_t n_random, uint64_t seed);

enum class Split : uint8_t { kTrain = 0, kValid = 1, kTest = 2 };

std::string_view split_name(Split s);
std::optional<Split> parse_split(std::string_view name);

struct SplitRatios {
  double train = 0.70;
  double valid = 0.15;
  double test = 0.15;

  std::array<double, 3> as_array() const { return {train, valid, test}; }
};

/// Record-to-split assignment in which every thread lands in one split.
struct SplitAssignment {
  SplitRatios ratios;
  std::vector<std::pair<std::string, Split>> assignments;  // input record order
  std::vector<std::string> warnings;

  std::unordered_map<std::string, Split> as_map() const;
  std::array<size_t, 3> counts() const;
};

/// Shuffles threads with `seed`, then hands each thread to the split with
/// the largest remaining record deficit (ties: train, valid, test).
SplitAssignment split_by_thread(const std::vector<TextRecord>& records, SplitRatios ratios,
                                uint64_t seed);

void write_split(const std::string& path, const SplitAssignment& split);
SplitAssignment read_split(const std::string& path);

}  // namespace localguard
