#include <random>

#include "capgen/textnorm.hpp"
#include "doctest.h"

using capgen::NGramProfile;
using capgen::TokenSeq;
using capgen::tokenize;

TEST_CASE("tokenize: normalization rule") {
  CHECK(tokenize("").empty());
  CHECK(tokenize("The cat, the CAT.") == TokenSeq{"the", "cat", "the", "cat"});
  CHECK(tokenize("Apollo 8 re-entry") == TokenSeq{"apollo", "8", "re", "entry"});
  CHECK(tokenize("  \t\n ") .empty());
  CHECK(tokenize("don't") == TokenSeq{"don", "t"});
  CHECK(tokenize("1,000.5") == TokenSeq{"1", "000", "5"});
}

TEST_CASE("tokenize: unicode punctuation and case") {
  CHECK(tokenize("“Quoted” \u2014 text…") == TokenSeq{"quoted", "text"});
  CHECK(tokenize("ÉCOLE Ğ Ωmega Москва") == TokenSeq{"école", "ğ", "ωmega", "москва"});
  CHECK(tokenize("Zürich’s «lake»") == TokenSeq{"zürich", "s", "lake"});
  CHECK(tokenize("東京、日本。") == TokenSeq{"東京", "日本"});
  CHECK(tokenize("a\xA0" "b") == TokenSeq{"a", "b"});  // stray continuation byte separates
  CHECK(tokenize("x\xC2\xA0y") == TokenSeq{"x", "y"});  // no-break space
}

TEST_CASE("tokenize: tokens are never empty and never contain whitespace") {
  std::mt19937_64 rng(11);
  const std::string alphabet = "aZ9 -.,'\t\n\xC3\xA9!";
  for (int iter = 0; iter < 500; ++iter) {
    std::string text;
    const int len = static_cast<int>(rng() % 40);
    for (int i = 0; i < len; ++i) text.push_back(alphabet[rng() % alphabet.size()]);
    const auto tokens = tokenize(text);
    for (const auto& t : tokens) {
      REQUIRE_FALSE(t.empty());
      REQUIRE(t.find_first_of(" \t\n\r") == std::string::npos);
    }
    // Idempotent through a join.
    REQUIRE(tokenize(capgen::join_tokens(tokens)) == tokens);
  }
}

TEST_CASE("ngram_profile: enumeration") {
  const TokenSeq aba{"a", "b", "a"};
  const auto p = capgen::ngram_profile(aba, 4);
  CHECK(p.at(1) == NGramProfile::Counts{{"a", 2}, {"b", 1}});
  CHECK(p.at(2) == NGramProfile::Counts{{"a b", 1}, {"b a", 1}});
  CHECK(p.at(3) == NGramProfile::Counts{{"a b a", 1}});
  CHECK(p.at(4).empty());
  CHECK(p.total(4) == 0);
  CHECK(p.at(9).empty());
  CHECK_THROWS(capgen::ngram_profile(aba, 0));
}

TEST_CASE("ngram_profile: window sums and duplication") {
  std::mt19937_64 rng(5);
  for (int iter = 0; iter < 200; ++iter) {
    TokenSeq tokens;
    const int len = static_cast<int>(rng() % 10);
    for (int i = 0; i < len; ++i) tokens.push_back(std::string(1, static_cast<char>('a' + rng() % 4)));
    const NGramProfile p(tokens, 4);
    for (int n = 1; n <= 4; ++n) {
      int sum = 0;
      for (const auto& [g, c] : p.at(n)) {
        REQUIRE(c >= 1);
        sum += c;
      }
      const int expected = std::max(0, len - n + 1);
      REQUIRE(sum == expected);
      REQUIRE(p.total(n) == static_cast<std::size_t>(expected));
      REQUIRE(p.at(n).size() <= static_cast<std::size_t>(expected));
    }
    TokenSeq doubled = tokens;
    doubled.insert(doubled.end(), tokens.begin(), tokens.end());
    const NGramProfile d(doubled, 4);
    for (const auto& [g, c] : p.at(1)) REQUIRE(d.at(1).at(g) == 2 * c);
    for (int n = 2; n <= 4; ++n) {
      for (const auto& [g, c] : p.at(n)) REQUIRE(d.at(n).at(g) >= 2 * c);
    }
  }
}
