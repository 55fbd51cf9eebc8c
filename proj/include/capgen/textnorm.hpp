#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace capgen {

/// Lowercased tokens; none empty, none containing whitespace.
using TokenSeq = std::vector<std::string>;

/// An n-gram is its tokens joined by a single space. Tokens never contain
/// whitespace, so the encoding is unambiguous and orders lexicographically.
using NGram = std::string;

/// Identifier of the normalization rule below, embedded in every report.
inline constexpr std::string_view kTokenizerId = "lower-punctsep-ws/v1";

/// Default maximum n-gram order.
inline constexpr int kDefaultMaxOrder = 4;

/// Splits text into lowercase tokens. Any Unicode punctuation, symbol or
/// whitespace code point is a separator (hyphens and apostrophes included);
/// letters and digits are kept. Case folding covers ASCII, Latin-1,
/// Latin Extended-A, Greek and Cyrillic and does not consult the locale.
/// Invalid UTF-8 bytes act as separators.
TokenSeq tokenize(std::string_view text);

/// Tokens joined with single spaces.
std::string join_tokens(const TokenSeq& tokens);

/// Multisets of contiguous n-grams for every order 1..max_order.
class NGramProfile {
 public:
  using Counts = std::map<NGram, int>;

  NGramProfile() = default;
  NGramProfile(const TokenSeq& tokens, int max_order);

  int max_order() const noexcept { return static_cast<int>(by_order_.size()); }

  /// Counts at order n (1-based). Orders above max_order() read as empty.
  const Counts& at(int n) const;

  /// Total windows at order n, i.e. max(0, len - n + 1).
  std::size_t total(int n) const;

 private:
  std::vector<Counts> by_order_;
  std::vector<std::size_t> totals_;
};

/// Convenience for NGramProfile(tokens, max_order). Requires max_order >= 1.
NGramProfile ngram_profile(const TokenSeq& tokens, int max_order);

}  // namespace capgen
