#pragma once

#include <array>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "localguard/corpus.hpp"
#include "localguard/taxonomy.hpp"

namespace localguard {

struct CategoryVote {
  bool yes = false;
  std::string reason;
};

/// One model's answer for one record.
struct LlmVerdict {
  std::string model_id;
  std::array<CategoryVote, kNumCategories> votes{};
  std::string raw;
  double latency_ms = 0.0;

  /// OR over the seven category labels.
  bool binary() const;
};

/// Why a model response could not be turned into a verdict. what() carries
/// the short code: "no_json", "missing:<category>", "bad_label:<category>" or
/// "bad_reason:<category>".
class ParseError : public std::runtime_error {
 public:
  enum class Kind { kNoJson, kMissing, kBadLabel, kBadReason };

  ParseError(Kind kind, std::string detail);

  Kind kind() const { return kind_; }
  const std::string& detail() const { return detail_; }

 private:
  Kind kind_;
  std::string detail_;
};

/// Extracts the first parseable JSON object embedded in `raw` and reads the
/// seven criteria from it. Criterion keys are matched loosely, so both
/// "encouraging self-harm" and "self_harm" are accepted; labels are
/// case-insensitive "Yes"/"No".
LlmVerdict parse_verdict(std::string_view raw, std::string model_id);

enum class Policy : uint8_t { kMajority, kConsensus };

std::string_view policy_name(Policy p);
std::optional<Policy> parse_policy(std::string_view name);

/// Consensus: yes iff all votes yes, no iff all no. Majority: the side with
/// strictly more than half the votes, otherwise undetermined.
TriState aggregate_votes(const std::vector<bool>& votes, Policy policy);

struct CategoryAggregate {
  TriState state = TriState::kUndetermined;
  std::vector<bool> votes;  // one per model, in verdict order
};

struct EnsembleVerdict {
  std::string record_id;
  std::array<CategoryAggregate, kNumCategories> categories{};
  /// Policy applied to the per-model binaries (OR of each model's labels).
  CategoryAggregate binary;
  Policy policy = Policy::kConsensus;
  size_t n_models = 0;
  std::vector<std::string> model_ids;

  LabelVector labels() const;
};

/// Combines one record's verdicts under `policy`. Returns nullopt (record
/// unlabelled) when fewer than two verdicts are available.
std::optional<EnsembleVerdict> aggregate_ensemble(std::string record_id,
                                                  std::span<const LlmVerdict> verdicts,
                                                  Policy policy);

/// Fraction of records whose votes are unanimous. Throws on empty input or
/// a record with fewer than two votes.
double agreement_rate(const std::vector<std::vector<bool>>& vote_sets);

struct ExpertEntry {
  std::string record_id;
  LabelVector gold;  // gold.unsafe must be yes or no
};
using ExpertSet = std::vector<ExpertEntry>;

ExpertSet load_expert_set(const std::string& path);

struct BinaryScores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  size_t n_scored = 0;
  size_t n_undetermined = 0;
};

/// Scores the ensemble's binary label against expert gold labels, using
/// only records whose ensemble binary state is determined. Positive class is
/// unsafe.
BinaryScores score_against_expert(std::span<const EnsembleVerdict> ensemble, const ExpertSet& gold);

struct LabelledRow {
  std::string record_id;
  std::string thread_id;
  std::string text;
  Split split = Split::kTrain;
  LabelVector labels;
};

struct LabelledDataset {
  std::vector<LabelledRow> rows;
};

struct TargetStats {
  size_t positives = 0;
  size_t negatives = 0;
  size_t undetermined = 0;

  size_t determined() const { return positives + negatives; }
  /// Positives as a percentage of rows with a determined label.
  double positive_pct() const;
  /// Fraction of all rows with a determined label.
  double consensus_rate() const;
};

/// Published full-scale reference counts, printed under the statistics
/// table for comparison. Not used in any computation.
struct ReferenceCounts {
  static constexpr size_t kUnsafePositives = 8375;
  static constexpr double kUnsafePct = 6.15;
  static constexpr size_t kToxicPositives = 7295;
  static constexpr double kToxicPct = 7.30;
};

/// Counts in the shape of a per-category positive-label breakdown.
struct DatasetStats {
  size_t n_records = 0;
  std::array<TargetStats, kNumCategories> categories{};
  TargetStats binary;
  std::array<size_t, 3> split_counts{};

  const TargetStats& at(const Target& t) const;
  std::string to_markdown() const;
};

struct CompiledDataset {
  LabelledDataset dataset;
  DatasetStats stats;
};

/// Joins ensemble verdicts with their records and split. Throws
/// std::invalid_argument when a verdict has no record or no split.
CompiledDataset compile_dataset(std::span<const EnsembleVerdict> ensemble,
                                std::span<const TextRecord> records, const SplitAssignment& split);

DatasetStats compute_stats(const LabelledDataset& dataset);

void save_dataset(const std::string& path, const LabelledDataset& dataset);
LabelledDataset load_dataset(const std::string& path);

struct VerdictLogEntry {
  std::string record_id;
  LlmVerdict verdict;
};

/// JSONL of {record_id, model_id, labels, reasons, raw_sha256}.
void write_verdict_log(const std::string& path, std::span<const VerdictLogEntry> entries);
/// Verdicts grouped by record id, in first-appearance order.
std::vector<std::pair<std::string, std::vector<LlmVerdict>>> read_verdict_log(const std::string& path);

void write_ensemble(const std::string& path, std::span<const EnsembleVerdict> ensemble);
std::vector<EnsembleVerdict> read_ensemble(const std::string& path);

}  // namespace localguard
