#include <doctest.h>

#include <cmath>
#include <vector>

#include "localguard/classifier.hpp"
#include "localguard/util.hpp"
#include "oracles.hpp"

using namespace localguard;

namespace {

LabelledRow row_with(Category c, TriState s, Split split = Split::kTrain) {
  LabelledRow r;
  r.record_id = "r" + std::to_string(static_cast<int>(s));
  r.split = split;
  r.labels.categories[index_of(c)] = s;
  r.labels.unsafe = s;
  return r;
}

struct Problem {
  Matrix X;
  Vector y;
};

Problem random_problem(uint64_t seed, Eigen::Index n, Eigen::Index d) {
  const auto z = lgtest::normals(seed, static_cast<size_t>(n * (d + 1)));
  Problem p{Matrix(n, d), Vector(n)};
  size_t k = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    double s = 0.0;
    for (Eigen::Index j = 0; j < d; ++j) {
      p.X(i, j) = z[k++];
      s += p.X(i, j) * (j % 2 ? -1.0 : 1.0);
    }
    p.y(i) = s + 0.5 * z[k++] > 0 ? 1.0 : -1.0;
  }
  if ((p.y.array() > 0).all()) p.y(0) = -1.0;
  if ((p.y.array() < 0).all()) p.y(0) = 1.0;
  return p;
}

std::vector<std::vector<double>> rows_of(const Matrix& X) {
  std::vector<std::vector<double>> out(static_cast<size_t>(X.rows()));
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    for (Eigen::Index j = 0; j < X.cols(); ++j) out[static_cast<size_t>(i)].push_back(X(i, j));
  }
  return out;
}

double optimality_residual(const Matrix& X, const Vector& y, const RidgeModel& m) {
  const Vector xm = X.colwise().mean().transpose();
  const Matrix Xc = X.rowwise() - xm.transpose();
  const Vector yc = y.array() - y.mean();
  const Vector grad = 2.0 * Xc.transpose() * (Xc * m.weights - yc) + 2.0 * m.alpha * m.weights;
  return grad.cwiseAbs().maxCoeff() / (1.0 + (Xc.transpose() * yc).cwiseAbs().maxCoeff());
}

}  // namespace

TEST_SUITE("classifier") {
  TEST_CASE("filter_consensus_rows keeps determined rows") {
    LabelledDataset ds;
    ds.rows = {row_with(Category::kToxic, TriState::kYes), row_with(Category::kToxic, TriState::kUndetermined),
               row_with(Category::kToxic, TriState::kNo)};
    const auto kept = filter_consensus_rows(ds, Target::of(Category::kToxic));
    CHECK(kept.rows == std::vector<size_t>{0, 2});
    CHECK(kept.labels(0) == 1.0);
    CHECK(kept.labels(1) == -1.0);
    CHECK(kept.kept_fraction == doctest::Approx(2.0 / 3.0));
    CHECK_THROWS_AS(filter_consensus_rows(ds, Target::of(Category::kToxic), Split::kTest), TrainingError);
    ds.rows[0].split = Split::kValid;
    const auto valid = filter_consensus_rows(ds, Target::of(Category::kToxic), Split::kValid);
    CHECK(valid.rows == std::vector<size_t>{0});
    CHECK(valid.kept_fraction == 1.0);
  }

  TEST_CASE("ridge one-dimensional closed form") {
    Matrix X(2, 1);
    X << 2, -2;
    Vector y(2);
    y << 1, -1;
    const auto m = train_ridge(X, y, 1.0);
    CHECK(std::abs(m.weights(0) - 4.0 / 9.0) <= 1e-12);
    CHECK(std::abs(m.bias) <= 1e-12);
    const std::vector<float> x2 = {2.0f};
    CHECK(std::abs(ridge_score(m, x2) - 8.0 / 9.0) <= 1e-12);
    const std::vector<float> x0 = {0.0f};
    CHECK(ridge_score(m, x0) == 0.0);
    const std::vector<float> bad = {1.0f, 2.0f};
    CHECK_THROWS(ridge_score(m, bad));
  }

  TEST_CASE("ridge rejects degenerate input") {
    Matrix X(3, 1);
    X << 1, 2, 3;
    Vector pos = Vector::Ones(3);
    CHECK_THROWS_AS(train_ridge(X, pos, 1.0), TrainingError);
    Vector y(3);
    y << 1, -1, 1;
    CHECK_THROWS_AS(train_ridge(X, y, 0.0), TrainingError);
    Matrix Xn = X;
    Xn(1, 0) = NAN;
    CHECK_THROWS_AS(train_ridge(Xn, y, 1.0), TrainingError);
    CHECK_THROWS_AS(train_ridge(X.topRows(1), y.head(1), 1.0), TrainingError);
  }

  TEST_CASE("ridge matches the gradient-descent oracle") {
    const auto p = random_problem(11, 20, 4);
    const auto m = train_ridge(p.X, p.y, 1.0);
    const auto oracle = lgtest::ridge_gd_oracle(rows_of(p.X), std::vector<double>(p.y.data(), p.y.data() + p.y.size()), 1.0);
    for (Eigen::Index j = 0; j < 4; ++j) {
      CHECK(std::abs(m.weights(j) - oracle[static_cast<size_t>(j)]) <= 1e-4 * std::abs(oracle[static_cast<size_t>(j)]));
    }
    CHECK(std::abs(m.bias - oracle[4]) <= 1e-4 * std::max(1.0, std::abs(oracle[4])));
  }

  TEST_CASE("ridge satisfies the first-order condition") {
    for (uint64_t s = 0; s < 20; ++s) {
      const auto p = random_problem(100 + s, 30, 6);
      const double alpha = 0.1 + static_cast<double>(s);
      CHECK(optimality_residual(p.X, p.y, train_ridge(p.X, p.y, alpha)) <= 1e-6);
    }
  }

  TEST_CASE("ridge shrinkage and shift invariance") {
    const auto p = random_problem(7, 40, 5);
    double prev = INFINITY;
    for (double alpha : {0.01, 0.1, 1.0, 10.0, 100.0}) {
      const double norm = train_ridge(p.X, p.y, alpha).weights.norm();
      CHECK(norm <= prev);
      prev = norm;
    }
    Matrix shifted = p.X;
    shifted.rowwise() += Eigen::RowVectorXd::LinSpaced(5, -3.0, 7.0);
    const auto a = train_ridge(p.X, p.y, 1.0);
    const auto b = train_ridge(shifted, p.y, 1.0);
    const Vector sa = ridge_scores(a, p.X);
    const Vector sb = ridge_scores(b, shifted);
    CHECK((sa - sb).cwiseAbs().maxCoeff() <= 1e-9);
  }

  TEST_CASE("batch ridge scores equal per-row scores") {
    const auto p = random_problem(5, 15, 3);
    const auto m = train_ridge(p.X, p.y, 1.0);
    const Vector batch = ridge_scores(m, p.X);
    for (Eigen::Index i = 0; i < p.X.rows(); ++i) {
      CHECK(batch(i) == doctest::Approx(ridge_score(m, Vector(p.X.row(i).transpose()))).epsilon(1e-14));
    }
  }

  TEST_CASE("zero network scores one half") {
    const auto m = NeuralModel::zeros(4, 8);
    const std::vector<float> x = {1, -2, 3, 0.5};
    CHECK(nn_score(m, x) == 0.5);
    CHECK_THROWS(nn_score(m, std::vector<float>{1, 2}));
  }

  TEST_CASE("network gradients agree with central differences") {
    for (uint64_t s = 0; s < 5; ++s) {
      const auto p = lgtest::random_nn_problem(s);
      CHECK(lgtest::nn_gradcheck(p.model, p.X, p.y) <= 1e-4);
      CHECK(nn_gradients(p.model, p.X, p.y).loss == doctest::Approx(lgtest::nn_loss_oracle(p.model, p.X, p.y)).epsilon(1e-12));
    }
  }

  TEST_CASE("network training is deterministic and fits a separable toy set") {
    Rng rng(4);
    Matrix X(40, 4);
    Vector y(40);
    for (Eigen::Index i = 0; i < 40; ++i) {
      const double label = i % 2;
      for (Eigen::Index j = 0; j < 4; ++j) X(i, j) = rng.normal() * 0.5 + (label ? 1.5 : -1.5);
      y(i) = label;
    }
    NnHyper hyper;
    hyper.seed = 17;
    hyper.lr = 0.01;
    const auto a = train_nn(X, y, hyper);
    const auto b = train_nn(X, y, hyper);
    CHECK(a.w1 == b.w1);
    CHECK(a.b1 == b.b1);
    CHECK(a.w2 == b.w2);
    CHECK(a.b2 == b.b2);
    size_t correct = 0;
    for (Eigen::Index i = 0; i < 40; ++i) {
      const double s = nn_score(a, Vector(X.row(i).transpose()));
      CHECK(s > 0.0);
      CHECK(s < 1.0);
      correct += (s >= 0.5) == (y(i) == 1.0);
    }
    CHECK(correct >= 38);
    Vector single = Vector::Ones(40);
    CHECK_THROWS_AS(train_nn(X, single, hyper), TrainingError);
  }

  TEST_CASE("network output range and monotone in the output bias") {
    NnHyper hyper;
    hyper.seed = 3;
    hyper.hidden = 16;
    auto m = NeuralModel::init(6, hyper);
    Rng rng(9);
    for (int i = 0; i < 1000; ++i) {
      Vector x(6);
      for (auto& v : x) v = rng.normal() * 3.0;
      const double s = nn_score(m, x);
      CHECK(s > 0.0);
      CHECK(s < 1.0);
    }
    Vector x = Vector::Ones(6);
    double prev = nn_score(m, x);
    for (int k = 0; k < 5; ++k) {
      m.b2 += 0.5;
      const double next = nn_score(m, x);
      CHECK(next > prev);
      prev = next;
    }
  }

  TEST_CASE("platt scaling separates classes and is monotone") {
    const std::vector<double> scores = {-2, -1, -0.5, 0.2, 0.5, 1, 2, -0.1};
    const std::vector<double> labels = {-1, -1, -1, 1, 1, 1, 1, 1};
    const auto p = fit_platt(scores, labels);
    CHECK(p.slope > 0.0);
    CHECK(p.apply(2.0) > 0.5);
    CHECK(p.apply(-2.0) < 0.5);
    CHECK(p.apply(1.0) > p.apply(0.0));
    const std::vector<double> one = {1, 1};
    CHECK_THROWS_AS(fit_platt(scores, std::vector<double>(8, 1.0)), TrainingError);
    CHECK_THROWS(fit_platt(one, labels));
  }
}
