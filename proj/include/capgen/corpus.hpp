#pragma once

#include <array>
#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace capgen {

enum class Split { kTrain, kVal, kTest };

inline constexpr std::array<Split, 3> kAllSplits = {Split::kTrain, Split::kVal, Split::kTest};

std::string_view to_string(Split split);

/// Parses a canonical split label ("train", "val", "test").
std::optional<Split> parse_split(std::string_view label);

struct CorpusEntry {
  std::string image_id;
  std::string article_id;
  std::string description;
  std::string context;
  std::string caption;  // gold reference
  Split split = Split::kTrain;

  bool operator==(const CorpusEntry&) const = default;
};

/// Immutable, ordered collection of entries with unique image ids.
class Corpus {
 public:
  Corpus() = default;

  /// Throws CorpusError on duplicate image ids.
  Corpus(std::vector<CorpusEntry> entries, std::string source_digest);

  const std::vector<CorpusEntry>& entries() const noexcept { return entries_; }
  const std::string& source_digest() const noexcept { return source_digest_; }
  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }

  const CorpusEntry* find(std::string_view image_id) const;

  bool operator==(const Corpus&) const = default;

 private:
  std::vector<CorpusEntry> entries_;
  std::string source_digest_;
};

enum class CorpusFormat {
  kCanonicalJsonl,   // one record per line, fields named as in CorpusEntry
  kConcadiaAdapter,  // upstream Concadia layout, see parse_corpus
};

std::optional<CorpusFormat> parse_corpus_format(std::string_view name);

enum class ParseMode {
  kStrict,   // any invalid record fails the whole parse
  kLenient,  // invalid records are skipped and reported as warnings
};

struct ParseResult {
  Corpus corpus;
  std::vector<std::string> warnings;
};

/// Reads a corpus from `source`. Problems are reported with 1-based line
/// numbers (canonical) or record indices (adapter). In strict mode every
/// problem is collected and thrown together as a CorpusError.
///
/// The Concadia adapter accepts either a single JSON document with an
/// "images" array or one JSON object per line. Each object may use
/// "filename" or "image_id" for the id; text fields may be plain strings or
/// objects carrying a "raw" string; split labels "dev", "valid" and
/// "validation" map to val.
ParseResult parse_corpus(std::istream& source, CorpusFormat format,
                         ParseMode mode = ParseMode::kStrict);
ParseResult parse_corpus(std::string_view bytes, CorpusFormat format,
                         ParseMode mode = ParseMode::kStrict);
ParseResult load_corpus(const std::string& path, CorpusFormat format,
                        ParseMode mode = ParseMode::kStrict);

/// Canonical JSONL rendering; parse(serialize(c)) reproduces c's entries.
std::string serialize_corpus(const Corpus& corpus);

/// Entries of one split in file order. The digest gains a "#<split>" tag
/// unless it already ends with that tag, so filtering is idempotent.
Corpus filter_split(const Corpus& corpus, Split split);

struct SplitStats {
  Split split = Split::kTrain;
  std::size_t n_entries = 0;
  std::size_t n_articles = 0;
  std::optional<double> mean_caption_tokens;  // absent for an empty split
  std::optional<double> mean_description_tokens;
};

/// One row per split in train, val, test order. Lengths use tokenize().
std::vector<SplitStats> corpus_stats(const Corpus& corpus);

}  // namespace capgen
