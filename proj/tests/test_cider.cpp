#include <algorithm>
#include <cmath>
#include <random>

#include "capgen/cider.hpp"
#include "capgen/error.hpp"
#include "doctest.h"
#include "oracle/brute_cider.hpp"

using namespace capgen;

namespace {

// Two images with disjoint vocabularies: A "the cat sat", B "a dog ran".
struct TwoImages {
  TokenSeq a = tokenize("the cat sat");
  TokenSeq b = tokenize("a dog ran");
  std::vector<ReferenceSet> sets{{"A", {a}}, {"B", {b}}};
  DfTable df = build_df_table(sets, 4);
};

TfIdfVector vec(const std::string& text, int n, const DfTable& df) {
  return tfidf_vector(NGramProfile(tokenize(text), 4), n, df);
}

}  // namespace

TEST_CASE("build_df_table: hand-enumerated counts") {
  TwoImages f;
  CHECK(f.df.n_images() == 2);
  CHECK(f.df.df(1, "the") == 1);
  CHECK(f.df.df(1, "cat") == 1);
  CHECK(f.df.df(1, "dog") == 1);
  CHECK(f.df.df(2, "cat sat") == 1);
  CHECK(f.df.df(1, "zebra") == 0);

  std::vector<ReferenceSet> shared{{"A", {tokenize("the cat")}}, {"B", {tokenize("the dog"), tokenize("the the")}}};
  auto df = build_df_table(shared, 2);
  CHECK(df.df(1, "the") == 2);  // counted once per image
  CHECK(df.df(1, "the") == static_cast<int>(df.n_images()));

  std::vector<ReferenceSet> single{{"only", {tokenize("x y z")}}};
  auto one = build_df_table(single, 3);
  for (int n = 1; n <= 3; ++n) {
    for (const auto& [g, c] : one.at(n)) CHECK(c == 1);
  }
}

TEST_CASE("build_df_table: errors") {
  std::vector<ReferenceSet> none;
  CHECK_THROWS_AS(build_df_table(none, 4), Error);
  std::vector<ReferenceSet> empty_refs{{"A", {tokenize("x")}}, {"lonely", {}}};
  CHECK_THROWS_WITH_AS(build_df_table(empty_refs, 4), doctest::Contains("lonely"), Error);
}

TEST_CASE("DfTable JSON round-trip and provenance") {
  TwoImages f;
  auto copy = DfTable::from_json(f.df.to_json());
  CHECK(copy == f.df);
  CHECK(copy.provenance() == f.df.provenance());
  CHECK(f.df.provenance().starts_with("sha256:"));
  CHECK_THROWS_AS(DfTable::from_json(R"({"n_images":1,"df":[{"x":2}]})"), Error);
  CHECK_THROWS_AS(DfTable::from_json("nope"), Error);
}

TEST_CASE("tfidf_vector: hand-derived weights") {
  TwoImages f;
  const auto v = vec("the cat sat", 1, f.df);
  CHECK(v.weights.at("cat") == doctest::Approx(std::log(2.0) / 3.0).epsilon(1e-15));
  CHECK(std::abs(v.weights.at("cat") - 0.2310490601866484) < 1e-12);

  // Unseen n-grams are treated as df = 1.
  const auto unseen = vec("zebra", 1, f.df);
  CHECK(unseen.weights.at("zebra") == doctest::Approx(std::log(2.0)));

  // Ubiquitous n-grams weigh exactly 0.
  std::vector<ReferenceSet> sets{{"A", {tokenize("the cat")}}, {"B", {tokenize("the dog")}}};
  auto df = build_df_table(sets, 2);
  CHECK(vec("the cat", 1, df).weights.at("the") == 0.0);

  // No window at this order.
  CHECK(vec("the cat sat", 4, f.df).weights.empty());
}

TEST_CASE("cider_n: cosine cases") {
  TwoImages f;
  std::vector<TfIdfVector> refs_a{vec("the cat sat", 1, f.df)};
  CHECK(cider_n(vec("the cat sat", 1, f.df), refs_a) == 1.0);
  CHECK(cider_n(vec("a dog ran", 1, f.df), refs_a) == 0.0);
  CHECK(std::abs(cider_n(vec("the cat ran", 1, f.df), refs_a) - 2.0 / 3.0) < 1e-12);

  std::vector<TfIdfVector> none;
  CHECK_THROWS_AS(cider_n(refs_a[0], none), Error);
}

TEST_CASE("cider_score: combined values") {
  TwoImages f;
  const std::vector<TokenSeq> refs{f.a};
  CiderConfig cfg;
  auto s = cider_score(f.a, refs, f.df, cfg);
  CHECK(s.value == 7.5);
  REQUIRE(s.per_order.size() == 4);
  CHECK(s.per_order[3] == 0.0);

  CHECK(cider_score(f.b, refs, f.df, cfg).value == 0.0);

  cfg.sigma = 1.0;
  CHECK(cider_score(f.a, refs, f.df, cfg).value == 0.75);

  auto empty = cider_score(TokenSeq{}, refs, f.df, cfg);
  CHECK(empty.value == 0.0);
  CHECK(empty.empty_candidate);

  CiderConfig weighted;
  weighted.weights = {1.0, 0.0, 0.0, 0.0};
  CHECK(cider_score(tokenize("the cat ran"), refs, f.df, weighted).value == doctest::Approx(10.0 * 2.0 / 3.0));
}

TEST_CASE("cider_score: configuration errors") {
  TwoImages f;
  const std::vector<TokenSeq> refs{f.a};
  CiderConfig cfg;
  cfg.max_order = 5;  // table only has 4 orders
  CHECK_THROWS_AS(cider_score(f.a, refs, f.df, cfg), Error);
  cfg = {};
  cfg.sigma = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = {};
  cfg.weights = {0.5, 0.5};
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = {};
  cfg.cider_d = true;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  const std::vector<TokenSeq> no_refs;
  CHECK_THROWS_AS(cider_score(f.a, no_refs, f.df, CiderConfig{}), Error);
}

TEST_CASE("corpus_cider: means, ids and provenance") {
  std::vector<ScoringItem> items{
      {"x", tokenize("the cat sat"), {tokenize("the cat sat")}},
      {"y", tokenize("zzz"), {tokenize("a dog ran")}},
  };
  CiderConfig cfg;
  cfg.max_order = 3;
  auto report = corpus_cider(items, cfg);
  CHECK(report.per_item.at("x") == 10.0);
  CHECK(report.per_item.at("y") == 0.0);
  CHECK(report.corpus_mean == 5.0);
  CHECK(report.per_order_means == std::vector<double>{0.5, 0.5, 0.5});
  CHECK(report.df_provenance.starts_with("sha256:"));

  std::reverse(items.begin(), items.end());
  auto reversed = corpus_cider(items, cfg, nullptr, 2);
  CHECK(reversed.per_item == report.per_item);
  CHECK(reversed.corpus_mean == report.corpus_mean);

  items.push_back(items.front());
  CHECK_THROWS_AS(corpus_cider(items, cfg), Error);
  std::vector<ScoringItem> none;
  CHECK_THROWS_AS(corpus_cider(none, cfg), Error);
}

TEST_CASE("corpus_cider: perfect matches with distinct vocabulary score sigma") {
  std::vector<ScoringItem> items;
  for (int i = 0; i < 6; ++i) {
    TokenSeq s;
    for (int k = 0; k < 5 + i; ++k) s.push_back("w" + std::to_string(i) + "_" + std::to_string(k));
    items.push_back({"img" + std::to_string(i), s, {s}});
  }
  auto report = corpus_cider(items, CiderConfig{}, nullptr, 3);
  CHECK(report.corpus_mean == 10.0);
  for (const auto& [id, v] : report.per_item) CHECK(v == 10.0);
}

TEST_CASE("cider_score agrees with the brute-force evaluator") {
  std::mt19937_64 rng(2024);
  const char* alphabet[] = {"a", "b", "c", "d", "e", "f"};
  auto sentence = [&] {
    TokenSeq s(rng() % 9);
    for (auto& t : s) t = alphabet[rng() % 6];
    return s;
  };
  for (int iter = 0; iter < 200; ++iter) {
    const int n_images = 1 + static_cast<int>(rng() % 5);
    std::vector<ReferenceSet> sets;
    std::vector<std::vector<oracle::Sentence>> images;
    for (int i = 0; i < n_images; ++i) {
      ReferenceSet set{"i" + std::to_string(i), {}};
      const int m = 1 + static_cast<int>(rng() % 3);
      for (int j = 0; j < m; ++j) set.references.push_back(sentence());
      images.push_back(set.references);
      sets.push_back(std::move(set));
    }
    const auto df = build_df_table(sets, 4);
    const auto cand = sentence();
    const auto& refs = sets[rng() % sets.size()].references;
    const double got = cider_score(cand, refs, df, CiderConfig{}).value;
    const double want = oracle::cider(cand, refs, images, 4, 10.0);
    REQUIRE(std::abs(got - want) < 1e-9);
  }
}
