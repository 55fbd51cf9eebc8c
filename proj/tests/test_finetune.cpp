#include <algorithm>
#include <set>

#include "capgen/digest.hpp"
#include "capgen/error.hpp"
#include "capgen/finetune.hpp"
#include "doctest.h"
#include "json.hpp"
#include "test_support.hpp"

using namespace capgen;

// Golden values below come from tests/golden/pinned_shuffle.py, an
// independent implementation of the same generator and shuffle.

TEST_CASE("SplitMix64 reference sequence") {
  SplitMix64 rng(0);
  CHECK(rng.next() == 0xe220a8397b1dcdafULL);
  CHECK(rng.next() == 0x6e789e6aa1b965f4ULL);
  CHECK(rng.next() == 0x06c45d188009454fULL);
}

TEST_CASE("sample_training_subset") {
  std::vector<CorpusEntry> entries;
  for (const char* id : {"id-d", "id-a", "id-e", "id-c", "id-b"}) {
    CorpusEntry e;
    e.image_id = id;
    e.description = "d";
    e.caption = "c";
    entries.push_back(e);
  }
  CorpusEntry test_only;
  test_only.image_id = "id-test";
  test_only.split = Split::kTest;
  entries.push_back(test_only);
  const Corpus corpus(entries, "x");

  SUBCASE("golden 3 of 5 with seed 42") {
    auto picked = sample_training_subset(corpus, 3, 42);
    REQUIRE(picked.size() == 3);
    CHECK(picked[0].image_id == "id-b");
    CHECK(picked[1].image_id == "id-c");
    CHECK(picked[2].image_id == "id-a");
  }
  SUBCASE("k = 0") { CHECK(sample_training_subset(corpus, 0, 1).empty()); }
  SUBCASE("k = train size is a permutation of the train split") {
    auto all = sample_training_subset(corpus, 5, 9);
    std::set<std::string> ids;
    for (const auto& e : all) ids.insert(e.image_id);
    CHECK(ids == std::set<std::string>{"id-a", "id-b", "id-c", "id-d", "id-e"});
  }
  SUBCASE("k too large") { CHECK_THROWS_AS(sample_training_subset(corpus, 6, 1), ConfigError); }
  SUBCASE("input order does not matter") {
    std::reverse(entries.begin(), entries.end());
    const Corpus reversed(entries, "y");
    auto a = sample_training_subset(corpus, 4, 77);
    auto b = sample_training_subset(reversed, 4, 77);
    CHECK(a == b);
  }
}

TEST_CASE("sample of 100 from the 120-entry fixture matches the reference") {
  const auto corpus = testing::make_train_fixture(120);
  const auto picked = sample_training_subset(corpus, 100, 7);
  REQUIRE(picked.size() == 100);
  CHECK(picked[0].image_id == "img-029");
  CHECK(picked[1].image_id == "img-083");
  std::string joined;
  for (const auto& e : picked) joined += (joined.empty() ? "" : "\n") + e.image_id;
  CHECK(sha256_hex(joined) == "9bd8010bba8f26d53be5bdf56ed00cbb7502944d17d792cfa06d63228612b46e");
}

TEST_CASE("export_pairs") {
  const auto tmpl = PromptTemplate::default_template();
  const auto policy = BudgetPolicy::for_window(2048);
  const auto corpus = testing::make_train_fixture(3);

  CHECK(export_pairs({}, tmpl, policy).empty());

  const auto one = export_pairs(std::span(corpus.entries()).first(1), tmpl, policy);
  CHECK(std::count(one.begin(), one.end(), '\n') == 1);
  auto rec = nlohmann::json::parse(one);
  CHECK(rec["prompt"].get<std::string>().ends_with(kCaptionLeadIn));
  CHECK(rec["completion"] == " Caption 0.\n");
  CHECK(one.starts_with("{\"prompt\":"));

  auto pairs = make_pairs(corpus.entries(), tmpl, policy);
  REQUIRE(pairs.size() == 3);
  CHECK(pairs[2].prompt == fit_budget(corpus.entries()[2], tmpl, policy).prompt);

  std::vector<CorpusEntry> bad(corpus.entries().begin(), corpus.entries().end());
  bad[0].description = std::string(10'000, 'x');
  bad[2].description = std::string(10'000, 'y');
  BudgetPolicy tiny = BudgetPolicy::for_window(1024);
  CHECK_THROWS_WITH_AS(export_pairs(bad, tmpl, tiny), doctest::Contains("img-000 img-002"), ConfigError);
}

TEST_CASE("export of the 100-entry sample matches the reference bytes") {
  const auto corpus = testing::make_train_fixture(120);
  const auto picked = sample_training_subset(corpus, 100, 7);
  const auto out = export_pairs(picked, PromptTemplate::default_template(), BudgetPolicy::for_window(2048));
  CHECK(std::count(out.begin(), out.end(), '\n') == 100);
  CHECK(sha256_hex(out) == "47760a3c6447978c93d6c7a5c4e507ea54dfdbfb43802f5233d8c8cc22614afd");
}
