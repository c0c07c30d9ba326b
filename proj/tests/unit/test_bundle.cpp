#include <doctest.h>

#include <filesystem>

#include "localguard/bundle.hpp"
#include "localguard/util.hpp"
#include "stubs.hpp"

using namespace localguard;

namespace {

ModelBundle random_bundle(uint64_t seed, size_t dim, HeadKind kind) {
  Rng rng(seed);
  ModelBundle b;
  b.version = "test-" + std::to_string(seed);
  b.embedding = {dim, true, "store:x"};
  for (const auto& t : all_targets()) {
    Head h;
    h.target = t;
    h.kind = kind;
    if (kind == HeadKind::kRidge) {
      for (size_t j = 0; j < dim; ++j) h.weights.push_back(static_cast<float>(rng.normal()));
      h.bias = static_cast<float>(rng.normal());
      h.calibration = Calibration::kSigmoid;
      h.platt = {rng.uniform(0.5, 3.0), rng.normal()};
      h.threshold = 0.5;
    } else {
      h.hidden = 5;
      for (size_t j = 0; j < 5 * dim; ++j) h.w1.push_back(static_cast<float>(rng.normal()));
      for (size_t j = 0; j < 5; ++j) h.b1.push_back(static_cast<float>(rng.normal()));
      for (size_t j = 0; j < 5; ++j) h.w2.push_back(static_cast<float>(rng.normal()));
      h.b2 = static_cast<float>(rng.normal());
      h.threshold = 0.5;
    }
    b.heads.push_back(h);
  }
  return b;
}

std::vector<std::vector<float>> random_inputs(uint64_t seed, size_t n, size_t dim) {
  Rng rng(seed);
  std::vector<std::vector<float>> out(n, std::vector<float>(dim));
  for (auto& v : out) {
    for (auto& x : v) x = static_cast<float>(rng.normal());
  }
  return out;
}

}  // namespace

TEST_SUITE("bundle") {
  TEST_CASE("save and load reproduce scores bit-exactly") {
    for (HeadKind kind : {HeadKind::kRidge, HeadKind::kNeural}) {
      const auto dir = lgtest::temp_dir("bundle");
      const auto b = random_bundle(kind == HeadKind::kRidge ? 1 : 2, 6, kind);
      b.save(dir);
      const auto loaded = ModelBundle::load(dir);
      CHECK(loaded.version == b.version);
      CHECK(loaded.embedding.dim == 6);
      CHECK(loaded.embedding.source == "store:x");
      const auto xs = random_inputs(3, 200, 6);
      for (const auto& t : all_targets()) {
        const Head& a = b.head(t);
        const Head& c = loaded.head(t);
        CHECK(c.kind == a.kind);
        CHECK(c.threshold == a.threshold);
        CHECK(c.platt.slope == a.platt.slope);
        CHECK(c.platt.intercept == a.platt.intercept);
        for (const auto& x : xs) CHECK(c.score(x) == a.score(x));
      }
    }
  }

  TEST_CASE("tampered weight file fails the checksum") {
    const auto dir = lgtest::temp_dir("tamper");
    random_bundle(4, 3, HeadKind::kRidge).save(dir);
    const auto file = dir + "/toxic.bin";
    std::string bytes = read_file(file);
    bytes[0] ^= 0x01;
    write_file(file, bytes);
    CHECK_THROWS_AS(ModelBundle::load(dir), BundleError);
  }

  TEST_CASE("missing heads and dim disagreements are rejected") {
    auto b = random_bundle(5, 3, HeadKind::kRidge);
    b.heads.pop_back();
    CHECK_THROWS_AS(b.check(), BundleError);
    auto c = random_bundle(5, 3, HeadKind::kRidge);
    c.embedding.dim = 4;
    CHECK_THROWS_AS(c.check(), BundleError);
    CHECK_THROWS_AS(ModelBundle::load(lgtest::temp_dir("empty")), std::exception);
  }

  TEST_CASE("raw head scores are the ridge decision value") {
    RidgeModel m;
    m.weights = Vector(2);
    m.weights << 0.5, -0.25;
    m.bias = 0.125;
    const Head h = Head::from_ridge(m, Target::binary());
    CHECK(h.threshold == 0.0);
    CHECK(h.calibration == Calibration::kRaw);
    const std::vector<float> x = {2.0f, 4.0f};
    CHECK(h.score(x) == 0.125);
    CHECK(h.flagged(0.0));
    CHECK_FALSE(h.flagged(-0.01));
  }

  TEST_CASE("train_bundle fits all heads on the synthetic fixture") {
    const auto& fx = lgtest::synthetic_fixture();
    const auto ds = lgtest::truth_dataset(fx);
    const auto emb = lgtest::planted_embedder(fx);
    TrainReport report;
    TrainOptions opts;
    const auto b = train_bundle(ds, *emb, {lgtest::kPlantedDim, true, "test"}, opts, &report);
    CHECK(b.heads.size() == kNumCategories + 1);
    CHECK(report.missing_embeddings == 0);
    for (const auto& hr : report.heads) {
      CHECK(hr.n_train == 420);
      CHECK(hr.calibrated == (b.head(hr.target).calibration == Calibration::kSigmoid));
      CHECK(hr.kept_fraction == 1.0);
    }
    CHECK(report.heads[0].calibrated);
    const Head& bin = b.head(Target::binary());
    CHECK(bin.calibration == Calibration::kSigmoid);
    CHECK(bin.threshold == 0.5);
    size_t correct = 0, n = 0;
    for (const auto& r : ds.rows) {
      if (r.split != Split::kTest) continue;
      auto v = normalize(lgtest::planted_embedding(fx, r.record_id));
      correct += bin.flagged(bin.score(v.values)) == (r.labels.unsafe == TriState::kYes);
      ++n;
    }
    CHECK(static_cast<double>(correct) / static_cast<double>(n) >= 0.9);

    opts.kind = HeadKind::kNeural;
    opts.nn.epochs = 5;
    opts.nn.hidden = 8;
    const auto nb = train_bundle(ds, *emb, {lgtest::kPlantedDim, true, "test"}, opts);
    CHECK(nb.head(Target::of(Category::kToxic)).kind == HeadKind::kNeural);
  }
}
