#include <doctest.h>

#include <set>

#include "localguard/prompt.hpp"
#include "localguard/util.hpp"
#include "stubs.hpp"

using namespace localguard;

namespace {

std::string golden(const std::string& name) { return read_file(lgtest::fixture_path("prompts/" + name)); }

std::string substitute(std::string s, const std::string& text) {
  const std::string ph(PromptTemplate::kPlaceholder);
  const auto pos = s.find(ph);
  REQUIRE(pos != std::string::npos);
  return s.replace(pos, ph.size(), text);
}

struct Variant {
  const char* file;
  PromptToggles toggles;
};

const Variant kVariants[] = {
    {"prompt_full.txt", {true, true, true}},
    {"prompt_no_context.txt", {false, true, true}},
    {"prompt_no_fewshot.txt", {true, false, true}},
    {"prompt_no_cot.txt", {true, true, false}},
    {"prompt_task_only.txt", {false, false, false}},
};

}  // namespace

TEST_SUITE("prompt") {
  TEST_CASE("templates match the golden files byte for byte") {
    for (const auto& v : kVariants) {
      CHECK_MESSAGE(PromptTemplate::standard().render_template(v.toggles) == golden(v.file), v.file);
    }
  }

  TEST_CASE("rendering substitutes the comment into the golden layout") {
    for (const auto& v : kVariants) {
      CHECK_MESSAGE(render_prompt("hello", v.toggles) == substitute(golden(v.file), "hello"), v.file);
    }
  }

  TEST_CASE("disabling chain-of-thought removes the step list") {
    const auto p = render_prompt("hello", {true, true, false});
    CHECK(p.find("For each criterion, do the following") == std::string::npos);
    CHECK(render_prompt("hello").find("For each criterion, do the following") != std::string::npos);
  }

  TEST_CASE("the task-only prompt still lists all seven criteria") {
    const auto p = render_prompt("hello", PromptToggles::none());
    for (const char* c : {"a. hateful", "b. harassment", "c. encouraging public harm", "d. encouraging self-harm",
                          "e. sexual", "f. toxic", "g. violent"}) {
      CHECK_MESSAGE(p.find(c) != std::string::npos, c);
    }
  }

  TEST_CASE("rendering is injective in the text") {
    std::set<std::string> prompts;
    const std::vector<std::string> texts = {"a", "b", "ab", "a b", "hello", "hello ", "<insert statement here>", "é"};
    for (const auto& t : texts) prompts.insert(render_prompt(t));
    CHECK(prompts.size() == texts.size());
  }

  TEST_CASE("length is the sum of enabled blocks plus separators and text") {
    const auto& tmpl = PromptTemplate::standard();
    const std::string text = "wah lao eh";
    for (int mask = 0; mask < 8; ++mask) {
      const PromptToggles t{(mask & 1) != 0, (mask & 2) != 0, (mask & 4) != 0};
      size_t expected = tmpl.task_block().size() + 1;
      if (t.context) expected += tmpl.context_block().size() + 1;
      if (t.cot) expected += tmpl.cot_block().size() + 1;
      if (t.fewshot) expected += tmpl.fewshot_block().size() + 1;
      expected += tmpl.closing().size() - PromptTemplate::kPlaceholder.size() + text.size();
      CHECK(render_prompt(text, t).size() == expected);
    }
  }

  TEST_CASE("errors") {
    CHECK_THROWS_AS(render_prompt(""), std::invalid_argument);
    CHECK_THROWS_AS(PromptTemplate("c", "t", "cot", "f", "no placeholder"), std::invalid_argument);
    CHECK_THROWS_AS(PromptTemplate("c", "t", "cot", "f", "<insert statement here><insert statement here>"),
                    std::invalid_argument);
  }
}
