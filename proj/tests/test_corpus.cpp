#include <sstream>

#include "capgen/corpus.hpp"
#include "capgen/error.hpp"
#include "doctest.h"
#include "test_support.hpp"

using namespace capgen;

namespace {

std::string line(const std::string& id, const std::string& split, const std::string& caption = "A caption.",
                 const std::string& article = "art") {
  return R"({"image_id":")" + id + R"(","article_id":")" + article +
         R"(","description":"A description.","context":"Some context.","caption":")" + caption +
         R"(","split":")" + split + "\"}\n";
}

}  // namespace

TEST_CASE("parse_corpus: empty stream succeeds with a warning") {
  auto r = parse_corpus(std::string_view(""), CorpusFormat::kCanonicalJsonl);
  CHECK(r.corpus.empty());
  REQUIRE(r.warnings.size() == 1);
}

TEST_CASE("parse_corpus: file order is preserved") {
  auto r = load_corpus((testing::data_dir() / "tiny.jsonl").string(), CorpusFormat::kCanonicalJsonl);
  REQUIRE(r.corpus.size() == 3);
  CHECK(r.corpus.entries()[0].image_id == "t1");
  CHECK(r.corpus.entries()[1].image_id == "t2");
  CHECK(r.corpus.entries()[2].image_id == "t3");
  CHECK(r.corpus.entries()[2].split == Split::kTest);
  CHECK(r.corpus.source_digest().starts_with("sha256:"));
  CHECK(r.warnings.empty());
}

TEST_CASE("parse_corpus: strict mode collects every problem") {
  const std::string bytes = line("a", "train") + "{not json\n" + line("a", "test") + line("b", "dev") +
                            line("c", "train", "   ") + line("d", "test");
  try {
    parse_corpus(std::string_view(bytes), CorpusFormat::kCanonicalJsonl);
    FAIL("expected CorpusError");
  } catch (const CorpusError& ex) {
    const auto& p = ex.problems();
    REQUIRE(p.size() == 4);
    CHECK(p[0].starts_with("line 2: malformed JSON"));
    CHECK(p[1] == "line 3: duplicate image_id 'a'");
    CHECK(p[2] == "line 4: unknown split label 'dev'");
    CHECK(p[3] == "line 5: empty caption");
  }
}

TEST_CASE("parse_corpus: lenient mode skips with warnings") {
  const std::string bytes = line("a", "train") + "{not json\n" + line("b", "bogus") + line("c", "test");
  auto r = parse_corpus(std::string_view(bytes), CorpusFormat::kCanonicalJsonl, ParseMode::kLenient);
  REQUIRE(r.corpus.size() == 2);
  CHECK(r.corpus.entries()[1].image_id == "c");
  CHECK(r.warnings.size() == 2);
}

TEST_CASE("parse_corpus: missing fields and blank description") {
  const std::string bytes = R"({"image_id":"x","description":" ","caption":"c","split":"train"})" "\n"
                            R"({"description":"d","caption":"c","split":"train"})" "\n";
  try {
    parse_corpus(std::string_view(bytes), CorpusFormat::kCanonicalJsonl);
    FAIL("expected CorpusError");
  } catch (const CorpusError& ex) {
    REQUIRE(ex.problems().size() == 2);
    CHECK(ex.problems()[0] == "line 1: empty description");
    CHECK(ex.problems()[1] == "line 2: missing image_id");
  }
}

TEST_CASE("concadia adapter: whole document and per-line layouts") {
  const std::string doc = R"({"images":[
    {"filename":"Foo.jpg","article_id":12,"split":"dev",
     "description":{"raw":"A foo."},"caption":{"raw":"Foo in 1900."},"context":{"raw":"Foo was built."}},
    {"filename":"Bar.jpg","article_id":13,"split":"test",
     "description":"A bar.","caption":"Bar at night.","context":"Bars."}]})";
  auto r = parse_corpus(std::string_view(doc), CorpusFormat::kConcadiaAdapter);
  REQUIRE(r.corpus.size() == 2);
  const auto& foo = r.corpus.entries()[0];
  CHECK(foo.image_id == "Foo.jpg");
  CHECK(foo.article_id == "12");
  CHECK(foo.split == Split::kVal);
  CHECK(foo.caption == "Foo in 1900.");
  CHECK(foo.context == "Foo was built.");

  const std::string lines =
      R"({"filename":"A.png","split":"valid","description":{"raw":"d"},"caption":{"raw":"c"}})" "\n";
  auto l = parse_corpus(std::string_view(lines), CorpusFormat::kConcadiaAdapter);
  REQUIRE(l.corpus.size() == 1);
  CHECK(l.corpus.entries()[0].split == Split::kVal);
  CHECK(l.corpus.entries()[0].context.empty());
}

TEST_CASE("serialize_corpus round-trips") {
  const std::string bytes = line("a", "train", "Caption with \\\"quotes\\\" and \\u00e9") + line("b", "val") +
                            line("c", "test");
  auto first = parse_corpus(std::string_view(bytes), CorpusFormat::kCanonicalJsonl).corpus;
  const std::string text = serialize_corpus(first);
  auto second = parse_corpus(std::string_view(text), CorpusFormat::kCanonicalJsonl).corpus;
  CHECK(second.entries() == first.entries());
  CHECK(serialize_corpus(second) == text);
}

TEST_CASE("filter_split") {
  const std::string bytes = line("a", "train") + line("b", "train") + line("c", "test");
  auto corpus = parse_corpus(std::string_view(bytes), CorpusFormat::kCanonicalJsonl).corpus;

  auto test = filter_split(corpus, Split::kTest);
  REQUIRE(test.size() == 1);
  CHECK(test.entries()[0].image_id == "c");
  CHECK(test.source_digest() == corpus.source_digest() + "#test");

  CHECK(filter_split(corpus, Split::kVal).empty());

  auto train = filter_split(corpus, Split::kTrain);
  CHECK(filter_split(train, Split::kTrain) == train);

  std::size_t total = 0;
  for (Split s : kAllSplits) total += filter_split(corpus, s).size();
  CHECK(total == corpus.size());
}

TEST_CASE("corpus_stats") {
  const std::string bytes = line("a", "train", "two words", "art1") + line("b", "train", "one two three four", "art1") +
                            line("c", "test", "Single-entry split here", "art9");
  auto corpus = parse_corpus(std::string_view(bytes), CorpusFormat::kCanonicalJsonl).corpus;
  const auto stats = corpus_stats(corpus);
  REQUIRE(stats.size() == 3);
  CHECK(stats[0].split == Split::kTrain);
  CHECK(stats[0].n_entries == 2);
  CHECK(stats[0].n_articles == 1);
  CHECK(*stats[0].mean_caption_tokens == 3.0);
  CHECK(*stats[0].mean_description_tokens == 2.0);  // "A description."
  CHECK(stats[1].n_entries == 0);
  CHECK_FALSE(stats[1].mean_caption_tokens.has_value());
  CHECK(stats[2].n_entries == 1);
  CHECK(stats[2].n_articles == 1);
  CHECK(*stats[2].mean_caption_tokens == 4.0);
  CHECK(stats[0].n_entries + stats[1].n_entries + stats[2].n_entries == corpus.size());
}
