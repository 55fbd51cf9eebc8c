#include <random>

#include "capgen/error.hpp"
#include "capgen/fileio.hpp"
#include "capgen/promptgen.hpp"
#include "doctest.h"
#include "test_support.hpp"

using namespace capgen;

namespace {

CorpusEntry entry(std::string description, std::string context, std::string id = "img") {
  CorpusEntry e;
  e.image_id = std::move(id);
  e.description = std::move(description);
  e.context = std::move(context);
  e.caption = "c";
  return e;
}

}  // namespace

TEST_CASE("render_prompt: default template is byte-exact") {
  const auto tmpl = PromptTemplate::default_template();
  const auto prompt = render_prompt(entry("A red fox.", "Foxes are mammals."), tmpl);
  CHECK(prompt == read_file(testing::data_dir() / "prompt_golden.txt"));
  CHECK(prompt ==
        "Here is a description of an image: A red fox. \n Here is the context the image appears in: "
        "Foxes are mammals. \n. An appropriate caption for the image is: ");
  CHECK(tmpl.trailing_literal() == std::string(" \n. ") + std::string(kCaptionLeadIn));
}

TEST_CASE("the shipped template asset matches the built-in default") {
  const auto asset = PromptTemplate::load(CAPGEN_ASSET_DIR "/default_prompt.txt");
  CHECK(asset.text() == PromptTemplate::default_template().text());
}

TEST_CASE("render_prompt: substitution edge cases") {
  const auto tmpl = PromptTemplate::default_template();
  const auto empty_ctx = render_prompt(entry("D.", ""), tmpl);
  CHECK(empty_ctx == "Here is a description of an image: D. \n Here is the context the image appears in:  \n. "
                     "An appropriate caption for the image is: ");

  const auto tricky = render_prompt(entry("see {context} here", "{description}"), tmpl);
  CHECK(tricky.find("see {context} here") != std::string::npos);
  CHECK(tricky.find("appears in: {description} \n") != std::string::npos);
}

TEST_CASE("PromptTemplate: placeholder validation") {
  CHECK_THROWS_AS(PromptTemplate("t", "only {description}"), ConfigError);
  CHECK_THROWS_AS(PromptTemplate("t", "{description} {context} {context}"), ConfigError);
  const PromptTemplate reversed("r", "C={context}; D={description}!");
  CHECK(reversed.render("d", "c") == "C=c; D=d!");
  CHECK(reversed.trailing_literal() == "!");
  CHECK_THROWS_AS(PromptTemplate::load("/nonexistent/template.txt"), ConfigError);
}

TEST_CASE("BudgetPolicy::for_window") {
  const auto p = BudgetPolicy::for_window(2048);
  CHECK(p.max_chars == (2048 - 64) * 4);
  CHECK_THROWS_AS(BudgetPolicy::for_window(64, 4.0, 64), ConfigError);
  CHECK_THROWS_AS(BudgetPolicy::for_window(1024, 0.0), ConfigError);
}

TEST_CASE("fit_budget") {
  const auto tmpl = PromptTemplate::default_template();
  BudgetPolicy policy = BudgetPolicy::for_window(1024);

  SUBCASE("short context is untouched") {
    const auto e = entry("A red fox.", "Foxes are mammals.");
    const auto fitted = fit_budget(e, tmpl, policy);
    CHECK(fitted.prompt == render_prompt(e, tmpl));
    CHECK_FALSE(fitted.truncated);
  }
  SUBCASE("huge context is cut at a word boundary") {
    std::string ctx;
    while (ctx.size() < 100'000) ctx += "lorem ipsum dolor ";
    const auto e = entry("A red fox.", ctx);
    const auto fitted = fit_budget(e, tmpl, policy);
    CHECK(fitted.truncated);
    CHECK(fitted.prompt.size() <= policy.max_chars);
    CHECK(fitted.prompt.ends_with(kCaptionLeadIn));
    CHECK(fitted.prompt.find("A red fox.") != std::string::npos);
    CHECK(fitted.prompt.find(" \n. An appropriate") != std::string::npos);
    const auto kept = fitted.prompt.substr(0, fitted.prompt.find(" \n. An appropriate"));
    CHECK((kept.ends_with("lorem") || kept.ends_with("ipsum") || kept.ends_with("dolor")));
  }
  SUBCASE("oversized description is an error naming the image") {
    const auto e = entry(std::string(policy.max_chars, 'x'), "ctx", "big-one");
    try {
      fit_budget(e, tmpl, policy);
      FAIL("expected BudgetError");
    } catch (const BudgetError& ex) {
      CHECK(ex.image_id() == "big-one");
    }
  }
}

TEST_CASE("fit_budget: idempotent and always ends with the lead-in") {
  const auto tmpl = PromptTemplate::default_template();
  std::mt19937_64 rng(3);
  const std::string pieces[] = {"word", " ", "  ", "é", "\n", "longerword", "x"};
  for (int iter = 0; iter < 300; ++iter) {
    BudgetPolicy policy;
    policy.max_chars = tmpl.fixed_size() + 10 + rng() % 120;
    std::string ctx;
    const int n = static_cast<int>(rng() % 60);
    for (int i = 0; i < n; ++i) ctx += pieces[rng() % 7];
    auto e = entry("desc here.", ctx);
    const auto once = fit_budget(e, tmpl, policy);
    REQUIRE(once.prompt.size() <= policy.max_chars);
    REQUIRE(once.prompt.ends_with(kCaptionLeadIn));
    // Re-fitting an entry whose context is what survived changes nothing.
    const auto marker = std::string("appears in: ");
    const auto start = once.prompt.find(marker) + marker.size();
    const auto stop = once.prompt.rfind(" \n. An appropriate");
    e.context = once.prompt.substr(start, stop - start);
    REQUIRE(fit_budget(e, tmpl, policy).prompt == once.prompt);
  }
}
