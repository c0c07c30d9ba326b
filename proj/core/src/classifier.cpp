#include "localguard/classifier.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "localguard/util.hpp"

namespace localguard {
namespace {

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// log(1 + exp(z)) without overflow.
double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

void require_finite(const Matrix& X, const char* what) {
  if (!X.allFinite()) throw TrainingError(std::string(what) + " contains non-finite values");
}

Vector to_vector(std::span<const float> x) {
  Vector v(static_cast<Eigen::Index>(x.size()));
  for (size_t i = 0; i < x.size(); ++i) v[static_cast<Eigen::Index>(i)] = x[i];
  return v;
}

}  // namespace

ConsensusRows filter_consensus_rows(const LabelledDataset& dataset, const Target& target,
                                    std::optional<Split> split) {
  ConsensusRows out;
  std::vector<double> labels;
  size_t considered = 0;
  for (size_t i = 0; i < dataset.rows.size(); ++i) {
    const auto& row = dataset.rows[i];
    if (split && row.split != *split) continue;
    ++considered;
    const TriState state = target.is_binary() ? row.labels.unsafe : row.labels.at(*target.category);
    if (state == TriState::kUndetermined) continue;
    out.rows.push_back(i);
    labels.push_back(state == TriState::kYes ? 1.0 : -1.0);
  }
  if (out.rows.empty()) {
    throw TrainingError("no rows with a determined " + target.name() + " label");
  }
  out.labels = Eigen::Map<Vector>(labels.data(), static_cast<Eigen::Index>(labels.size()));
  out.kept_fraction = static_cast<double>(out.rows.size()) / static_cast<double>(considered);
  return out;
}

RidgeModel train_ridge(const Matrix& X, const Vector& y, double alpha) {
  if (!(alpha > 0.0)) throw TrainingError("ridge alpha must be positive");
  if (X.rows() != y.size()) throw TrainingError("ridge: X and y row counts differ");
  if (X.rows() < 2) throw TrainingError("ridge: need at least two rows");
  require_finite(X, "ridge X");
  if (!y.allFinite()) throw TrainingError("ridge y contains non-finite values");
  const bool has_pos = (y.array() > 0).any();
  const bool has_neg = (y.array() < 0).any();
  if (!has_pos || !has_neg) throw TrainingError("ridge: labels contain a single class");

  const Vector x_mean = X.colwise().mean().transpose();
  const double y_mean = y.mean();
  const Matrix Xc = X.rowwise() - x_mean.transpose();
  const Vector yc = y.array() - y_mean;

  const auto d = X.cols();
  Matrix gram = Matrix::Zero(d, d);
  gram.selfadjointView<Eigen::Lower>().rankUpdate(Xc.transpose());
  gram.diagonal().array() += alpha;
  const Vector rhs = Xc.transpose() * yc;

  const Eigen::LLT<Matrix, Eigen::Lower> llt(gram);
  if (llt.info() != Eigen::Success) throw TrainingError("ridge: Cholesky factorisation failed");

  RidgeModel model;
  model.weights = llt.solve(rhs);
  model.bias = y_mean - x_mean.dot(model.weights);
  model.alpha = alpha;
  model.train_meta.n_rows = static_cast<size_t>(X.rows());
  model.train_meta.feature_means = x_mean;
  if (!model.weights.allFinite() || !std::isfinite(model.bias)) {
    throw TrainingError("ridge: solution is not finite");
  }
  return model;
}

double ridge_score(const RidgeModel& model, const Eigen::Ref<const Vector>& x) {
  if (x.size() != model.weights.size()) {
    throw std::invalid_argument("ridge_score: dim " + std::to_string(x.size()) + " != model dim " +
                                std::to_string(model.weights.size()));
  }
  return x.dot(model.weights) + model.bias;
}

double ridge_score(const RidgeModel& model, std::span<const float> x) {
  return ridge_score(model, to_vector(x));
}

Vector ridge_scores(const RidgeModel& model, const Matrix& X) {
  if (X.cols() != model.weights.size()) throw std::invalid_argument("ridge_scores: dim mismatch");
  Vector out(X.rows());
  for (Eigen::Index i = 0; i < X.rows(); ++i) out[i] = X.row(i).dot(model.weights) + model.bias;
  return out;
}

NeuralModel NeuralModel::zeros(size_t dim, size_t hidden) {
  NeuralModel m;
  const auto h = static_cast<Eigen::Index>(hidden);
  m.w1 = Matrix::Zero(h, static_cast<Eigen::Index>(dim));
  m.b1 = Vector::Zero(h);
  m.w2 = Vector::Zero(h);
  m.b2 = 0.0;
  m.hyper.hidden = hidden;
  return m;
}

NeuralModel NeuralModel::init(size_t dim, const NnHyper& hyper) {
  if (hyper.hidden == 0) throw TrainingError("nn: hidden width must be positive");
  if (hyper.dropout < 0.0 || hyper.dropout >= 1.0) throw TrainingError("nn: dropout must be in [0,1)");
  NeuralModel m = zeros(dim, hyper.hidden);
  m.hyper = hyper;
  m.dropout_p = hyper.dropout;
  Rng rng(hyper.seed);
  const double bound1 = 1.0 / std::sqrt(static_cast<double>(dim));
  for (Eigen::Index r = 0; r < m.w1.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.w1.cols(); ++c) m.w1(r, c) = rng.uniform(-bound1, bound1);
  }
  for (Eigen::Index r = 0; r < m.b1.size(); ++r) m.b1[r] = rng.uniform(-bound1, bound1);
  const double bound2 = 1.0 / std::sqrt(static_cast<double>(hyper.hidden));
  for (Eigen::Index r = 0; r < m.w2.size(); ++r) m.w2[r] = rng.uniform(-bound2, bound2);
  m.b2 = rng.uniform(-bound2, bound2);
  return m;
}

NnGradients nn_gradients(const NeuralModel& model, const Matrix& X, const Vector& y,
                         const Matrix* dropout_mask) {
  const auto n = X.rows();
  if (n == 0) throw std::invalid_argument("nn_gradients: empty batch");
  if (X.cols() != model.w1.cols()) throw std::invalid_argument("nn_gradients: dim mismatch");
  const double keep = 1.0 - model.dropout_p;

  NnGradients g;
  g.w1 = Matrix::Zero(model.w1.rows(), model.w1.cols());
  g.b1 = Vector::Zero(model.b1.size());
  g.w2 = Vector::Zero(model.w2.size());
  g.b2 = 0.0;
  double loss = 0.0;

  // Pre-activations for the whole batch: n x hidden.
  const Matrix pre = (X * model.w1.transpose()).rowwise() + model.b1.transpose();
  for (Eigen::Index i = 0; i < n; ++i) {
    Vector act = pre.row(i).transpose().cwiseMax(0.0);
    Vector scale = Vector::Ones(act.size());
    if (dropout_mask) scale = dropout_mask->row(i).transpose() / keep;
    const Vector dropped = act.cwiseProduct(scale);
    const double z = model.w2.dot(dropped) + model.b2;
    loss += softplus(z) - y[i] * z;

    const double dz = (sigmoid(z) - y[i]) / static_cast<double>(n);
    g.w2 += dz * dropped;
    g.b2 += dz;
    Vector dh = (dz * model.w2).cwiseProduct(scale);
    for (Eigen::Index k = 0; k < dh.size(); ++k) {
      if (pre(i, k) <= 0.0) dh[k] = 0.0;
    }
    g.w1.noalias() += dh * X.row(i);
    g.b1 += dh;
  }
  g.loss = loss / static_cast<double>(n);
  return g;
}

NeuralModel train_nn(const Matrix& X, const Vector& y, const NnHyper& hyper) {
  if (X.rows() != y.size()) throw TrainingError("nn: X and y row counts differ");
  if (X.rows() == 0) throw TrainingError("nn: no training rows");
  require_finite(X, "nn X");
  bool has_pos = false, has_neg = false;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    if (y[i] != 0.0 && y[i] != 1.0) throw TrainingError("nn: labels must be 0 or 1");
    (y[i] == 1.0 ? has_pos : has_neg) = true;
  }
  if (!has_pos || !has_neg) throw TrainingError("nn: labels contain a single class");
  if (hyper.batch == 0 || hyper.epochs == 0 || !(hyper.lr > 0.0)) throw TrainingError("nn: invalid hyperparameters");

  NeuralModel model = NeuralModel::init(static_cast<size_t>(X.cols()), hyper);
  // Separate stream for shuffling and dropout so init is independent of them.
  Rng rng(hyper.seed ^ 0x9e3779b97f4a7c15ull);

  // Adam first and second moments, shaped like the parameters.
  NnGradients m1;
  m1.w1 = Matrix::Zero(model.w1.rows(), model.w1.cols());
  m1.b1 = Vector::Zero(model.b1.size());
  m1.w2 = Vector::Zero(model.w2.size());
  NnGradients m2 = m1;

  std::vector<Eigen::Index> order(static_cast<size_t>(X.rows()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  const auto hidden = static_cast<Eigen::Index>(model.hidden());
  size_t step = 0;

  for (size_t epoch = 0; epoch < hyper.epochs; ++epoch) {
    rng.shuffle(order);
    size_t batch_no = 0;
    for (size_t start = 0; start < order.size(); start += hyper.batch, ++batch_no) {
      const size_t end = std::min(order.size(), start + hyper.batch);
      const auto bs = static_cast<Eigen::Index>(end - start);
      Matrix xb(bs, X.cols());
      Vector yb(bs);
      for (Eigen::Index k = 0; k < bs; ++k) {
        xb.row(k) = X.row(order[start + static_cast<size_t>(k)]);
        yb[k] = y[order[start + static_cast<size_t>(k)]];
      }
      Matrix mask;
      const Matrix* mask_ptr = nullptr;
      if (model.dropout_p > 0.0) {
        mask.resize(bs, hidden);
        for (Eigen::Index r = 0; r < bs; ++r) {
          for (Eigen::Index c = 0; c < hidden; ++c) mask(r, c) = rng.unit() >= model.dropout_p ? 1.0 : 0.0;
        }
        mask_ptr = &mask;
      }

      const NnGradients g = nn_gradients(model, xb, yb, mask_ptr);
      if (!std::isfinite(g.loss)) {
        throw TrainingError("nn: non-finite loss at epoch " + std::to_string(epoch) + " batch " +
                            std::to_string(batch_no));
      }

      ++step;
      const double c1 = 1.0 - std::pow(hyper.beta1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(hyper.beta2, static_cast<double>(step));
      auto adam = [&](auto& param, const auto& grad, auto& mom, auto& vel) {
        mom = hyper.beta1 * mom + (1.0 - hyper.beta1) * grad;
        vel = hyper.beta2 * vel + (1.0 - hyper.beta2) * grad.cwiseProduct(grad);
        param.array() -= hyper.lr * (mom.array() / c1) / ((vel.array() / c2).sqrt() + hyper.eps);
      };
      adam(model.w1, g.w1, m1.w1, m2.w1);
      adam(model.b1, g.b1, m1.b1, m2.b1);
      adam(model.w2, g.w2, m1.w2, m2.w2);
      m1.b2 = hyper.beta1 * m1.b2 + (1.0 - hyper.beta1) * g.b2;
      m2.b2 = hyper.beta2 * m2.b2 + (1.0 - hyper.beta2) * g.b2 * g.b2;
      model.b2 -= hyper.lr * (m1.b2 / c1) / (std::sqrt(m2.b2 / c2) + hyper.eps);
    }
  }
  return model;
}

double nn_score(const NeuralModel& model, const Eigen::Ref<const Vector>& x) {
  if (x.size() != model.w1.cols()) {
    throw std::invalid_argument("nn_score: dim " + std::to_string(x.size()) + " != model dim " +
                                std::to_string(model.w1.cols()));
  }
  const Vector act = (model.w1 * x + model.b1).cwiseMax(0.0);
  return sigmoid(model.w2.dot(act) + model.b2);
}

double nn_score(const NeuralModel& model, std::span<const float> x) {
  return nn_score(model, to_vector(x));
}

double PlattScaling::apply(double score) const { return sigmoid(slope * score + intercept); }

PlattScaling fit_platt(std::span<const double> scores, std::span<const double> labels) {
  if (scores.size() != labels.size() || scores.empty()) {
    throw std::invalid_argument("fit_platt: need equal, non-empty score and label lists");
  }
  size_t n_pos = 0;
  for (double l : labels) n_pos += l > 0 ? 1 : 0;
  const size_t n_neg = labels.size() - n_pos;
  if (n_pos == 0 || n_neg == 0) throw TrainingError("fit_platt: labels contain a single class");

  // Smoothed targets keep the fit finite on separable data.
  const double t_pos = (static_cast<double>(n_pos) + 1.0) / (static_cast<double>(n_pos) + 2.0);
  const double t_neg = 1.0 / (static_cast<double>(n_neg) + 2.0);

  PlattScaling p{1.0, 0.0};
  auto objective = [&](const PlattScaling& q) {
    double f = 0.0;
    for (size_t i = 0; i < scores.size(); ++i) {
      const double t = labels[i] > 0 ? t_pos : t_neg;
      const double z = q.slope * scores[i] + q.intercept;
      f += softplus(z) - t * z;
    }
    return f;
  };
  double f = objective(p);
  for (int iter = 0; iter < 100; ++iter) {
    double g_a = 0, g_b = 0, h_aa = 1e-12, h_ab = 0, h_bb = 1e-12;
    for (size_t i = 0; i < scores.size(); ++i) {
      const double t = labels[i] > 0 ? t_pos : t_neg;
      const double s = scores[i];
      const double q = sigmoid(p.slope * s + p.intercept);
      const double w = q * (1.0 - q);
      g_a += (q - t) * s;
      g_b += (q - t);
      h_aa += w * s * s;
      h_ab += w * s;
      h_bb += w;
    }
    const double det = h_aa * h_bb - h_ab * h_ab;
    if (std::abs(det) < 1e-300) break;
    const double da = (h_bb * g_a - h_ab * g_b) / det;
    const double db = (h_aa * g_b - h_ab * g_a) / det;
    // Backtracking keeps every step a descent step.
    double step = 1.0;
    PlattScaling next{p.slope - da, p.intercept - db};
    double f_next = objective(next);
    while (f_next > f && step > 1e-10) {
      step *= 0.5;
      next = {p.slope - step * da, p.intercept - step * db};
      f_next = objective(next);
    }
    if (f_next > f) break;
    const bool converged = std::abs(f - f_next) < 1e-12 * (1.0 + std::abs(f));
    p = next;
    f = f_next;
    if (converged) break;
  }
  return p;
}

}  // namespace localguard
