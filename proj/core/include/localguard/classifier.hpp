#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "localguard/corpus.hpp"
#include "localguard/labeller.hpp"
#include "localguard/taxonomy.hpp"

namespace localguard {

using Matrix = Eigen::MatrixXd;  // rows are examples
using Vector = Eigen::VectorXd;

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Rows usable for one head: those whose label for the target is determined.
struct ConsensusRows {
  std::vector<size_t> rows;  // indices into dataset.rows
  Vector labels;             // +1 yes, -1 no
  double kept_fraction = 0.0;
};

/// Keeps rows with a yes/no label for `target`, optionally restricted to one
/// split. Throws TrainingError when nothing is kept.
ConsensusRows filter_consensus_rows(const LabelledDataset& dataset, const Target& target,
                                    std::optional<Split> split = std::nullopt);

struct RidgeModel {
  Vector weights;
  double bias = 0.0;
  double alpha = 1.0;
  Target target;
  struct TrainMeta {
    size_t n_rows = 0;
    uint64_t seed = 0;
    Vector feature_means;
  } train_meta;
};

/// Ridge regression on +/-1 targets with an unpenalised intercept:
///   w = (Xc'Xc + alpha I)^-1 Xc'yc,  b = mean(y) - mean(x).w
/// where Xc, yc are mean-centred. Solved with a Cholesky factorisation of the
/// dim x dim system. Throws TrainingError for one-class labels, non-finite
/// input, alpha <= 0 or fewer than two rows.
RidgeModel train_ridge(const Matrix& X, const Vector& y, double alpha = 1.0);

/// Raw decision value x.w + b; higher means more unsafe.
double ridge_score(const RidgeModel& model, std::span<const float> x);
double ridge_score(const RidgeModel& model, const Eigen::Ref<const Vector>& x);
Vector ridge_scores(const RidgeModel& model, const Matrix& X);

struct NnHyper {
  size_t epochs = 30;
  size_t batch = 8;
  double lr = 0.001;
  size_t hidden = 64;
  double dropout = 0.2;
  uint64_t seed = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// dim -> hidden (ReLU) -> dropout -> 1 (sigmoid).
struct NeuralModel {
  Matrix w1;  // hidden x dim
  Vector b1;  // hidden
  Vector w2;  // hidden
  double b2 = 0.0;
  double dropout_p = 0.2;
  NnHyper hyper;

  size_t dim() const { return static_cast<size_t>(w1.cols()); }
  size_t hidden() const { return static_cast<size_t>(w1.rows()); }

  static NeuralModel zeros(size_t dim, size_t hidden);
  /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for every weight and bias.
  static NeuralModel init(size_t dim, const NnHyper& hyper);
};

struct NnGradients {
  Matrix w1;
  Vector b1;
  Vector w2;
  double b2 = 0.0;
  double loss = 0.0;  // mean binary cross-entropy over the batch
};

/// Mean BCE loss and its gradients over a batch with labels in {0,1}.
/// `dropout_mask` (batch x hidden, entries 0/1) enables inverted dropout;
/// nullptr means no dropout.
NnGradients nn_gradients(const NeuralModel& model, const Matrix& X, const Vector& y,
                         const Matrix* dropout_mask = nullptr);

/// Mini-batch Adam on mean BCE. Deterministic given hyper.seed. Throws
/// TrainingError when the loss becomes non-finite, naming epoch and batch.
NeuralModel train_nn(const Matrix& X, const Vector& y, const NnHyper& hyper = {});

/// sigmoid(w2 . relu(w1 x + b1) + b2), dropout off.
double nn_score(const NeuralModel& model, std::span<const float> x);
double nn_score(const NeuralModel& model, const Eigen::Ref<const Vector>& x);

/// Logistic map p = sigmoid(slope * s + intercept).
struct PlattScaling {
  double slope = 1.0;
  double intercept = 0.0;

  double apply(double score) const;
};

/// Fits a Platt map by Newton's method on smoothed targets. `labels` are
/// +/-1 or {0,1}; positives are the values > 0.
PlattScaling fit_platt(std::span<const double> scores, std::span<const double> labels);

}  // namespace localguard
