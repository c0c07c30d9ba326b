#include <doctest.h>

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdlib>

#include "localguard/eval.hpp"
#include "localguard/util.hpp"
#include "oracles.hpp"
#include "stubs.hpp"

using namespace localguard;
using nlohmann::json;

namespace {

std::vector<ScoredExample> make(const std::vector<double>& scores, const std::vector<int>& gold) {
  std::vector<ScoredExample> out;
  for (size_t i = 0; i < scores.size(); ++i) out.push_back({"e" + std::to_string(i), scores[i], gold[i]});
  return out;
}

std::vector<ScoredExample> random_instance(Rng& rng, size_t n) {
  std::vector<ScoredExample> out;
  const uint64_t levels = 1 + rng.below(n);
  for (size_t i = 0; i < n; ++i) {
    out.push_back({"", static_cast<double>(rng.below(levels)) / 4.0, static_cast<int>(rng.below(2))});
  }
  out[rng.below(n)].gold = 1;
  return out;
}

class FixedProvider final : public ProviderClient {
 public:
  FixedProvider(Provider p, std::map<std::string, ProviderScores> by_text) : p_(p), by_text_(std::move(by_text)) {}
  Provider provider() const override { return p_; }
  std::string system_name() const override { return "fixed"; }
  ProviderScores score(const std::string& text) override {
    const auto it = by_text_.find(text);
    if (it == by_text_.end()) throw std::runtime_error("no score");
    return it->second;
  }

 private:
  Provider p_;
  std::map<std::string, ProviderScores> by_text_;
};

}  // namespace

TEST_SUITE("eval") {
  TEST_CASE("pr_auc examples") {
    CHECK(pr_auc(make({0.9, 0.8, 0.3}, {1, 0, 1})) == doctest::Approx((1.0 + 2.0 / 3.0) / 2.0).epsilon(1e-15));
    CHECK(pr_auc(make({0.9, 0.8, 0.3, 0.1}, {1, 1, 0, 0})) == 1.0);
    CHECK(pr_auc(make({0.5, 0.5, 0.5, 0.5}, {1, 0, 0, 0})) == 0.25);
    CHECK(pr_auc(make({0.5, 0.5, 0.1}, {1, 0, 1})) == doctest::Approx(0.5 * 0.5 + 0.5 * (2.0 / 3.0)));
  }

  TEST_CASE("pr_auc errors") {
    try {
      pr_auc(make({0.1, 0.2}, {0, 0}));
      FAIL("expected MetricError");
    } catch (const MetricError& e) {
      CHECK(std::string(e.what()) == "no_positives");
    }
    CHECK_THROWS_AS(pr_auc({}), MetricError);
    CHECK_THROWS_AS(pr_auc(make({NAN}, {1})), MetricError);
    CHECK_THROWS_AS(pr_auc(make({0.1}, {2})), MetricError);
  }

  TEST_CASE("pr_auc matches the threshold-enumeration oracle") {
    Rng rng(1);
    for (int i = 0; i < 200; ++i) {
      const auto ex = random_instance(rng, 1 + rng.below(12));
      CHECK(std::abs(pr_auc(ex) - lgtest::pr_auc_oracle(ex)) <= 1e-12);
    }
  }

  TEST_CASE("pr_auc is invariant under increasing transforms") {
    Rng rng(2);
    for (int i = 0; i < 50; ++i) {
      auto ex = random_instance(rng, 2 + rng.below(11));
      const double base = pr_auc(ex);
      auto e1 = ex, e2 = ex;
      for (auto& e : e1) e.score = std::exp(e.score);
      for (auto& e : e2) e.score = 3.0 * e.score - 7.0;
      CHECK(std::abs(pr_auc(e1) - base) <= 1e-12);
      CHECK(std::abs(pr_auc(e2) - base) <= 1e-12);
    }
  }

  TEST_CASE("pr_auc of a constant score equals prevalence") {
    Rng rng(3);
    for (int i = 0; i < 50; ++i) {
      auto ex = random_instance(rng, 1 + rng.below(30));
      size_t pos = 0;
      for (auto& e : ex) {
        e.score = 0.3;
        pos += static_cast<size_t>(e.gold);
      }
      CHECK(pr_auc(ex) == static_cast<double>(pos) / static_cast<double>(ex.size()));
    }
  }

  TEST_CASE("prf1 examples") {
    const auto m = prf1(make({0.9, 0.1, 0.8, 0.2}, {1, 1, 0, 0}), 0.5);
    CHECK(m.precision == 0.5);
    CHECK(m.recall == 0.5);
    CHECK(m.f1 == 0.5);
    const auto perfect = prf1(make({0.9, 0.8, 0.1}, {1, 1, 0}), 0.5);
    CHECK(perfect.precision == 1.0);
    CHECK(perfect.recall == 1.0);
    CHECK(perfect.f1 == 1.0);
    const auto none = prf1(make({0.9, 0.1}, {1, 0}), 2.0);
    CHECK(none.precision == 0.0);
    CHECK(none.precision_undefined);
    CHECK(none.recall == 0.0);
    CHECK(none.f1 == 0.0);
    const auto at = prf1(make({0.5, 0.4}, {1, 0}), 0.5);
    CHECK(at.recall == 1.0);
  }

  TEST_CASE("prf1 f1 is the harmonic mean") {
    Rng rng(4);
    for (int i = 0; i < 50; ++i) {
      const auto ex = random_instance(rng, 2 + rng.below(20));
      const auto m = prf1(ex, 0.5);
      if (m.precision + m.recall > 0) {
        CHECK(m.f1 == doctest::Approx(2 * m.precision * m.recall / (m.precision + m.recall)).epsilon(1e-12));
      }
    }
  }

  TEST_CASE("provider target scores follow the mapping") {
    const auto& mapping = ProviderMapping::builtin();
    ProviderScores openai{{{"hate", 0.2}, {"violence", 0.7}, {"sexual", 0.1}}, std::nullopt};
    CHECK(*provider_target_score(openai, Provider::kOpenAiModeration, Target::binary(), mapping) == 0.7);
    CHECK(*provider_target_score(openai, Provider::kOpenAiModeration, Target::of(Category::kHateful), mapping) == 0.2);
    CHECK_FALSE(provider_covers(Provider::kOpenAiModeration, Target::of(Category::kPublicHarm), mapping));
    CHECK_FALSE(provider_covers(Provider::kOpenAiModeration, Target::of(Category::kToxic), mapping));
    CHECK_FALSE(provider_covers(Provider::kPerspective, Target::of(Category::kSexual), mapping));
    CHECK_FALSE(provider_covers(Provider::kLlamaGuard, Target::of(Category::kToxic), mapping));
    CHECK(provider_covers(Provider::kLlamaGuard, Target::of(Category::kPublicHarm), mapping));

    ProviderScores persp{{{"toxicity", 0.4}, {"profanity", 0.8}}, std::nullopt};
    CHECK(*provider_target_score(persp, Provider::kPerspective, Target::of(Category::kToxic), mapping) == 0.8);
    CHECK_FALSE(provider_target_score(persp, Provider::kPerspective, Target::of(Category::kViolent), mapping));

    ProviderScores lg{{{"violence_and_hate", 0.9}}, 0.3};
    CHECK(*provider_target_score(lg, Provider::kLlamaGuard, Target::binary(), mapping) == 0.3);
    CHECK(*provider_target_score(lg, Provider::kLlamaGuard, Target::of(Category::kHateful), mapping) == 0.9);
    CHECK(*provider_target_score(lg, Provider::kLlamaGuard, Target::of(Category::kViolent), mapping) == 0.9);
  }

  TEST_CASE("provider cache persists and serves offline") {
    const auto dir = lgtest::temp_dir("cache");
    {
      auto cache = std::make_shared<ProviderCache>(dir + "/p.jsonl");
      auto inner = std::make_shared<FixedProvider>(
          Provider::kPerspective, std::map<std::string, ProviderScores>{{"hi", {{{"toxicity", 0.25}}, std::nullopt}}});
      CachedProvider p(Provider::kPerspective, "persp", cache, inner);
      CHECK(p.score("hi").categories.at("toxicity") == 0.25);
      CHECK(cache->size() == 1);
    }
    auto cache = std::make_shared<ProviderCache>(dir + "/p.jsonl");
    CHECK(cache->size() == 1);
    CHECK_FALSE(cache->get(Provider::kOpenAiModeration, "hi"));
    CachedProvider offline(Provider::kPerspective, "persp", cache);
    CHECK(offline.score("hi").categories.at("toxicity") == 0.25);
    CHECK_THROWS(offline.score("other"));
  }

  TEST_CASE("report marks unmapped, empty and failed cells") {
    ModelBundle b;
    b.version = "t";
    b.embedding = {1, false, ""};
    for (const auto& t : all_targets()) {
      Head h;
      h.target = t;
      h.weights = {1.0f};
      b.heads.push_back(h);
    }
    std::vector<EvalRecord> records;
    std::vector<std::optional<EmbeddingVector>> vecs;
    std::map<std::string, ProviderScores> by_text;
    for (int i = 0; i < 4; ++i) {
      EvalRecord r;
      r.record_id = "r" + std::to_string(i);
      r.text = "text " + std::to_string(i);
      r.gold.unsafe = i >= 2 ? TriState::kYes : TriState::kNo;
      records.push_back(r);
      vecs.push_back(EmbeddingVector{{static_cast<float>(i)}, false});
      if (i != 2) by_text[r.text] = {{{"hate", 0.1 * i}}, std::nullopt};
    }
    records.push_back({"r4", "no vector", {}});
    vecs.push_back(std::nullopt);
    std::vector<std::shared_ptr<ProviderClient>> providers = {
        std::make_shared<FixedProvider>(Provider::kOpenAiModeration, by_text)};
    const auto report = benchmark_report(b, "local", records, vecs, providers, ProviderMapping::builtin(), 2);
    const auto& local = report.cell("local", Target::binary());
    CHECK(local.n == 4);
    CHECK(local.n_pos == 2);
    CHECK(local.pr_auc == 1.0);
    CHECK(report.cell("local", Target::of(Category::kToxic)).display() == "n/a");
    CHECK(report.cell("fixed", Target::of(Category::kPublicHarm)).display() == "-");
    CHECK(report.cell("fixed", Target::binary()).display() == "failed(1)");
    CHECK(report.cell("fixed", Target::of(Category::kHateful)).display() == "failed(1)");
    const auto csv = report.to_csv();
    CHECK(csv.rfind("system,target,pr_auc,n,n_pos\n", 0) == 0);
    CHECK(csv.find("local,unsafe,1.000000,4,2\n") != std::string::npos);
    CHECK(csv.find("fixed,public_harm,-,0,0\n") != std::string::npos);
    const auto md = report.to_markdown();
    CHECK(md.find("| System | unsafe | hateful | harassment | public harm | self-harm | sexual | toxic | violent |") == 0);
    CHECK(md.find("| fixed | failed(1) | failed(1) |") != std::string::npos);
  }

  TEST_CASE("openai provider over HTTP") {
    lgtest::StubServer server;
    std::string auth;
    server.post("/moderations", [&](const lgtest::StubRequest& req) -> std::pair<int, std::string> {
      auth = req.header("authorization");
      CHECK(json::parse(req.body).at("input") == "hello");
      return {200, R"({"results":[{"category_scores":{"hate":0.1,"violence":0.6,"self-harm":0.2}}]})"};
    });
    server.start();
    ::setenv("LG_TEST_OPENAI_KEY", "sk-x", 1);
    const auto cfgs = parse_provider_configs(
        R"([{"provider":"openai_moderation","url":")" + server.url() + R"(/moderations","auth_env_var":"LG_TEST_OPENAI_KEY"}])");
    REQUIRE(cfgs.size() == 1);
    auto p = make_http_provider(cfgs[0]);
    const auto s = p->score("hello");
    CHECK(auth == "Bearer sk-x");
    CHECK(s.categories.at("violence") == 0.6);
    CHECK(s.categories.at("self_harm") == 0.2);
  }

  TEST_CASE("eval_records and dataset hash") {
    const auto& fx = lgtest::synthetic_fixture();
    const auto ds = lgtest::truth_dataset(fx);
    const auto test = eval_records(ds, Split::kTest);
    CHECK(test.size() == 60);
    CHECK(eval_records(ds, std::nullopt).size() == 600);
    const auto h = dataset_hash(test);
    CHECK(h == dataset_hash(test));
    auto changed = test;
    changed[0].gold.unsafe = changed[0].gold.unsafe == TriState::kYes ? TriState::kNo : TriState::kYes;
    CHECK(dataset_hash(changed) != h);
    const auto vecs = embed_records(test, *lgtest::planted_embedder(fx), true);
    for (const auto& v : vecs) {
      REQUIRE(v);
      CHECK(v->normalized);
    }
  }
}
