#include <doctest.h>

#include <nlohmann/json.hpp>

#include <chrono>
#include <thread>

#include "localguard/guard.hpp"
#include "stubs.hpp"

using namespace localguard;
using nlohmann::json;

namespace {

ModelBundle toy_bundle() {
  ModelBundle b;
  b.version = "toy-1";
  b.embedding = {2, false, "test"};
  for (const auto& t : all_targets()) {
    Head h;
    h.target = t;
    h.weights = t.is_binary() ? std::vector<float>{1.0f, 0.0f} : std::vector<float>{0.0f, 1.0f};
    h.threshold = 0.0;
    b.heads.push_back(h);
  }
  return b;
}

std::shared_ptr<Embedder> toy_embedder() {
  return std::make_shared<FunctionEmbedder>(2, [](const EmbedItem& item) -> EmbeddingVector {
    if (item.text == "bad") return {{1.0f, 0.0f}, false};
    if (item.text == "ok") return {{-1.0f, 0.0f}, false};
    if (item.text == "wide") return {{1.0f, 0.0f, 0.0f}, false};
    throw EmbeddingError("no vector for " + item.text);
  });
}

class ServiceFixture {
 public:
  explicit ServiceFixture(size_t max_batch = 4) {
    ServiceConfig cfg;
    cfg.port = 0;
    cfg.max_batch = max_batch;
    service = std::make_unique<ModerationService>(std::make_shared<const ModelBundle>(toy_bundle()),
                                                  toy_embedder(), cfg);
    port = service->bind();
    thread = std::thread([this] { service->listen(); });
    for (int i = 0; i < 200 && !service->running(); ++i) std::this_thread::sleep_for(std::chrono::milliseconds(5));
  }
  ~ServiceFixture() {
    service->stop();
    thread.join();
  }
  std::string url(const std::string& path) const { return "http://127.0.0.1:" + std::to_string(port) + path; }

  std::unique_ptr<ModerationService> service;
  int port = 0;
  std::thread thread;
};

}  // namespace

TEST_SUITE("guard") {
  TEST_CASE("toy bundle flags by dot product") {
    const auto b = toy_bundle();
    const std::vector<std::string> texts = {"bad", "ok"};
    const auto r = moderate(std::span<const std::string>(texts), b, *toy_embedder());
    REQUIRE(r.size() == 2);
    CHECK(r[0].ok());
    CHECK(r[0].binary.score == 1.0);
    CHECK(r[0].binary.flagged);
    CHECK(r[1].binary.score == -1.0);
    CHECK_FALSE(r[1].binary.flagged);
    CHECK(r[0].index == 0);
    CHECK(r[1].index == 1);
    CHECK(r[0].model_version == "toy-1");
    // Category heads read dim 1, which is 0 here: tie at the threshold flags.
    CHECK(r[1].categories[0].score == 0.0);
    CHECK(r[1].categories[0].flagged);
  }

  TEST_CASE("empty input, duplicates and per-item errors") {
    const auto b = toy_bundle();
    const auto emb = toy_embedder();
    CHECK(moderate(std::span<const std::string>(), b, *emb).empty());
    const std::vector<std::string> texts = {"bad", "mystery", "bad"};
    const auto r = moderate(std::span<const std::string>(texts), b, *emb);
    CHECK(r[0].binary == r[2].binary);
    CHECK(r[0].categories == r[2].categories);
    CHECK_FALSE(r[1].ok());
    CHECK(r[1].error.find("mystery") != std::string::npos);
    const std::vector<std::string> wide = {"wide", "ok"};
    CHECK_THROWS_AS(moderate(std::span<const std::string>(wide), b, *emb), ConfigError);
  }

  TEST_CASE("threshold overrides apply per head") {
    const auto b = toy_bundle();
    const std::vector<std::string> texts = {"bad"};
    const auto r = moderate(std::span<const std::string>(texts), b, *toy_embedder(), {{"unsafe", 1.5}});
    CHECK_FALSE(r[0].binary.flagged);
    CHECK_THROWS_AS(moderate(std::span<const std::string>(texts), b, *toy_embedder(), {{"nonsense", 0.5}}), ConfigError);
    const auto t = effective_thresholds(b, {{"toxic", 0.25}});
    CHECK(t[0] == 0.0);
    CHECK(t[1 + index_of(Category::kToxic)] == 0.25);
  }

  TEST_CASE("dim mismatch is a configuration error") {
    const auto b = toy_bundle();
    FunctionEmbedder three(3, [](const EmbedItem&) { return EmbeddingVector{{1, 2, 3}, false}; });
    const std::vector<std::string> texts = {"x"};
    CHECK_THROWS_AS(moderate(std::span<const std::string>(texts), b, three), ConfigError);
    ServiceConfig cfg;
    CHECK_THROWS_AS(ModerationService(std::make_shared<const ModelBundle>(b),
                                      std::make_shared<FunctionEmbedder>(three), cfg),
                    ConfigError);
  }

  TEST_CASE("service config validation") {
    ServiceConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    cfg.max_batch = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = {};
    cfg.thresholds["toxic"] = 1.5;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = {};
    cfg.thresholds["nope"] = 0.5;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = {};
    cfg.port = 70000;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
  }

  TEST_CASE("result JSON round-trips") {
    const auto b = toy_bundle();
    const std::vector<std::string> texts = {"bad", "mystery"};
    for (const auto& r : moderate(std::span<const std::string>(texts), b, *toy_embedder())) {
      CHECK(moderation_result_from_json(json::parse(to_json(r).dump())) == r);
    }
  }

  TEST_CASE("handler status codes") {
    ServiceConfig cfg;
    cfg.max_batch = 2;
    ModerationService svc(std::make_shared<const ModelBundle>(toy_bundle()), toy_embedder(), cfg);
    auto [ok, body] = svc.handle_moderate(R"({"texts":["bad"]})");
    CHECK(ok == 200);
    CHECK(body.at("results").size() == 1);
    auto [big, err] = svc.handle_moderate(R"({"texts":["a","b","c"]})");
    CHECK(big == 413);
    CHECK(err.at("max_batch") == 2);
    CHECK(err.at("error").get<std::string>().find("limit of 2") != std::string::npos);
    CHECK(svc.handle_moderate("not json").first == 400);
    CHECK(svc.handle_moderate(R"({"text":"x"})").first == 400);
    CHECK(svc.handle_moderate(R"({"texts":[1]})").first == 400);
    CHECK(svc.handle_moderate(R"({"texts":["a"],"ids":["x","y"]})").first == 400);
    auto [with_ids, res] = svc.handle_moderate(R"({"texts":["bad"],"ids":["doc-1"]})");
    CHECK(with_ids == 200);
    CHECK(res.at("results")[0].at("id") == "doc-1");
    const auto m = svc.metrics_json();
    CHECK(m.at("requests") == 7);
    CHECK(m.at("rejected") == 5);
  }

  TEST_CASE("HTTP endpoints") {
    ServiceFixture fx(4);
    auto [status, body] = lgtest::http_post(fx.url("/v1/moderate"), R"({"texts":["bad","ok"]})");
    CHECK(status == 200);
    const auto j = json::parse(body);
    REQUIRE(j.at("results").size() == 2);
    CHECK(j["results"][0]["binary"]["flagged"] == true);
    CHECK(j["results"][1]["binary"]["flagged"] == false);

    auto [too_big, _] = lgtest::http_post(fx.url("/v1/moderate"), R"({"texts":["a","b","c","d","e"]})");
    CHECK(too_big == 413);
    auto [bad, __] = lgtest::http_post(fx.url("/v1/moderate"), "{");
    CHECK(bad == 400);
    auto [h, hbody] = lgtest::http_get(fx.url("/v1/health"));
    CHECK(h == 200);
    CHECK(json::parse(hbody).at("model_version") == "toy-1");
    auto [m, mbody] = lgtest::http_get(fx.url("/v1/metrics"));
    CHECK(m == 200);
    CHECK(json::parse(mbody).at("requests") == 3);
  }

  TEST_CASE("HTTP results equal library results") {
    ServiceFixture fx(8);
    const std::vector<std::string> texts = {"bad", "ok", "mystery", "bad"};
    auto [status, body] = lgtest::http_post(fx.url("/v1/moderate"), json{{"texts", texts}}.dump());
    REQUIRE(status == 200);
    const auto lib = moderate(std::span<const std::string>(texts), toy_bundle(), *toy_embedder());
    const auto results = json::parse(body).at("results");
    REQUIRE(results.size() == lib.size());
    for (size_t i = 0; i < lib.size(); ++i) CHECK(moderation_result_from_json(results[i]) == lib[i]);
  }

  TEST_CASE("a thousand cached moderations take under a second") {
    const auto dir = lgtest::temp_dir("throughput");
    std::vector<std::string> ids;
    std::vector<EmbeddingVector> vecs;
    for (int i = 0; i < 1000; ++i) {
      ids.push_back("t" + std::to_string(i));
      vecs.push_back({{static_cast<float>(i % 7) - 3.0f, 1.0f}, false});
    }
    EmbeddingStore::save(dir + "/s.lgemb", ids, vecs, false);
    StoreEmbedder emb(std::make_shared<const EmbeddingStore>(EmbeddingStore::open(dir + "/s.lgemb")));
    const auto b = toy_bundle();
    const auto start = std::chrono::steady_clock::now();
    const auto r = moderate(std::span<const std::string>(ids), b, emb);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    CHECK(r.size() == 1000);
    CHECK(secs < 1.0);
  }
}
