#pragma once

#include <array>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "localguard/classifier.hpp"
#include "localguard/embedder.hpp"
#include "localguard/labeller.hpp"
#include "localguard/taxonomy.hpp"

namespace localguard {

class BundleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class HeadKind : uint8_t { kRidge, kNeural };
enum class Calibration : uint8_t { kRaw, kSigmoid };

std::string_view head_kind_name(HeadKind k);
std::string_view calibration_name(Calibration c);

/// A trained head with float32 parameters, exactly as stored on disk.
struct Head {
  Target target;
  HeadKind kind = HeadKind::kRidge;
  Calibration calibration = Calibration::kRaw;
  PlattScaling platt;
  double threshold = 0.0;

  // Ridge: weights (dim) and bias.
  std::vector<float> weights;
  float bias = 0.0f;

  // Neural: w1 is hidden x dim row-major.
  size_t hidden = 0;
  std::vector<float> w1;
  std::vector<float> b1;
  std::vector<float> w2;
  float b2 = 0.0f;

  size_t dim() const;

  /// Ridge decision value, or the network's probability.
  double raw_score(std::span<const float> x) const;
  /// raw_score passed through the head's calibration.
  double score(std::span<const float> x) const;
  double calibrate(double raw) const;
  bool flagged(double calibrated_score) const { return calibrated_score >= threshold; }

  /// Float32 view of a trained model. Default thresholds: 0 for raw ridge
  /// scores, 0.5 for calibrated or neural scores.
  static Head from_ridge(const RidgeModel& model, const Target& target);
  static Head from_neural(const NeuralModel& model, const Target& target);
};

struct EmbeddingSpec {
  size_t dim = 0;
  bool normalized = true;
  /// Where vectors come from, e.g. "store:emb.lgemb" or "remote:http://...".
  std::string source;
};

/// Embedding configuration plus one binary head and seven category heads.
///
/// On disk: a directory holding manifest.json and one <target>.bin per head.
/// Ridge files are [f32 LE x dim][f32 bias]; neural files are w1, b1, w2, b2
/// concatenated as f32 LE. The manifest records each file's SHA-256, checked
/// on load.
class ModelBundle {
 public:
  std::string version = "0";
  EmbeddingSpec embedding;
  std::vector<Head> heads;  // binary first, then categories in canonical order

  const Head& head(const Target& target) const;
  Head& head(const Target& target);

  /// Throws BundleError when a head is missing or dims disagree.
  void check() const;

  void save(const std::string& dir) const;
  static ModelBundle load(const std::string& dir);
};

struct TrainOptions {
  HeadKind kind = HeadKind::kRidge;
  double alpha = 1.0;
  NnHyper nn;
  /// Fit a Platt map on validation rows for ridge heads.
  bool calibrate = true;
  std::string version = "0";
};

struct HeadTrainReport {
  Target target;
  size_t n_train = 0;
  size_t n_pos = 0;
  double kept_fraction = 0.0;
  size_t n_calibration = 0;
  bool calibrated = false;
};

struct TrainReport {
  std::vector<HeadTrainReport> heads;
  size_t missing_embeddings = 0;
};

/// Design matrix for dataset rows, looked up by record id through `embedder`
/// and unit-normalised when `normalize` is set. Rows whose embedding fails
/// are left out; `present` lists the dataset rows that made it.
struct EmbeddedRows {
  Matrix X;
  std::vector<size_t> present;
  size_t missing = 0;
};

EmbeddedRows embed_rows(const LabelledDataset& dataset, std::span<const size_t> rows,
                        const Embedder& embedder, bool normalize);

/// Trains all eight heads on train-split rows with a determined label for
/// each head, calibrating ridge heads on the validation split.
ModelBundle train_bundle(const LabelledDataset& dataset, const Embedder& embedder,
                         const EmbeddingSpec& spec, const TrainOptions& options,
                         TrainReport* report = nullptr);

}  // namespace localguard
