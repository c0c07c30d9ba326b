#include <doctest.h>

#include "localguard/config.hpp"
#include "localguard/util.hpp"
#include "stubs.hpp"

using namespace localguard;

TEST_SUITE("config") {
  TEST_CASE("empty config gives defaults") {
    const auto c = parse_config("{}");
    CHECK(c.policy == Policy::kConsensus);
    CHECK(c.train.kind == HeadKind::kRidge);
    CHECK(c.train.alpha == 1.0);
    CHECK(c.train.nn.hidden == 64);
    CHECK(c.train.nn.dropout == 0.2);
    CHECK(c.service.max_batch == 64);
    CHECK(c.providers.empty());
  }

  TEST_CASE("sections are read") {
    const auto c = parse_config(R"({
      "corpus": {"n_flagged": 10, "n_random": 5, "seed": 3},
      "split": {"train": 0.8, "valid": 0.1, "test": 0.1, "seed": 9},
      "llm": {"policy": "majority", "retry_budget": 1,
              "providers": [{"name": "m1", "base_url": "http://x", "auth_env_var": "K"}],
              "prompt": {"cot": false}},
      "embedding": {"url": "http://e/embed", "dim": 16, "store": "s.lgemb", "max_batch": 32},
      "classifier": {"kind": "nn", "alpha": 2.5, "nn": {"hidden": 8, "epochs": 3}},
      "service": {"port": 9000, "max_batch": 10, "thresholds": {"toxic": 0.7}},
      "benchmark": {"cache": "cache", "providers": [{"provider": "perspective", "auth_env_var": "P"}]}
    })");
    CHECK(c.n_flagged == 10);
    CHECK(c.sample_seed == 3);
    CHECK(c.split.train == 0.8);
    CHECK(c.split_seed == 9);
    CHECK(c.policy == Policy::kMajority);
    CHECK(c.label.retry_budget == 1);
    REQUIRE(c.llm.size() == 1);
    CHECK(c.llm[0].base_url == "http://x");
    CHECK_FALSE(c.label.toggles.cot);
    CHECK(c.label.toggles.fewshot);
    CHECK(c.embedding.url == "http://e/embed");
    CHECK(c.embedding_dim == 16);
    CHECK(c.embedding.max_batch == 32);
    CHECK(c.store_path == "s.lgemb");
    CHECK(c.service.store_path == "s.lgemb");
    CHECK(c.train.kind == HeadKind::kNeural);
    CHECK(c.train.alpha == 2.5);
    CHECK(c.train.nn.hidden == 8);
    CHECK(c.train.nn.epochs == 3);
    CHECK(c.service.port == 9000);
    CHECK(c.service.thresholds.at("toxic") == 0.7);
    CHECK(c.provider_cache == "cache");
    REQUIRE(c.providers.size() == 1);
    CHECK(c.providers[0].provider == Provider::kPerspective);
    CHECK(c.providers[0].auth_env_var == "P");
  }

  TEST_CASE("malformed configs are rejected") {
    CHECK_THROWS(parse_config("[]"));
    CHECK_THROWS(parse_config("{"));
    CHECK_THROWS(parse_config(R"({"llm": {"policy": "plurality"}})"));
    CHECK_THROWS(parse_config(R"({"classifier": {"kind": "svm"}})"));
    CHECK_THROWS(parse_config(R"({"benchmark": {"providers": [{"provider": "acme"}]}})"));
  }

  TEST_CASE("load_config reads the shipped benchmark config") {
    const auto c = load_config(lgtest::fixture_path("data/fixtures/benchmark/config.json"));
    CHECK(c.providers.size() == 3);
    CHECK(c.benchmark_max_in_flight == 2);
  }
}
