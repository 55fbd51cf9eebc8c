#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "capgen/corpus.hpp"
#include "capgen/promptgen.hpp"

namespace capgen {

/// SplitMix64. The sampling below depends on this exact sequence.
class SplitMix64 {
 public:
  explicit constexpr SplitMix64(std::uint64_t seed) noexcept : state_(seed) {}

  constexpr std::uint64_t next() noexcept {
    state_ += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

 private:
  std::uint64_t state_;
};

/// Fisher-Yates from the back: for i = n-1 .. 1 swap item i with item
/// next() % (i + 1).
template <typename T>
void seeded_shuffle(std::vector<T>& items, std::uint64_t seed) {
  SplitMix64 rng(seed);
  for (std::size_t i = items.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.next() % i);
    std::swap(items[i - 1], items[j]);
  }
}

/// Train entries sorted by image id (bytewise), shuffled with
/// seeded_shuffle, first k kept. Throws ConfigError when k exceeds the
/// number of train entries.
std::vector<CorpusEntry> sample_training_subset(const Corpus& corpus, std::size_t k,
                                                std::uint64_t seed);

struct FinetunePair {
  std::string prompt;
  std::string completion;
};

/// " " + caption + "\n", matching the generation-time stop sequence.
std::string finetune_completion(const CorpusEntry& entry);

/// Budget-fitted prompt/completion pairs, in input order. If any entry does
/// not fit, nothing is produced and the thrown ConfigError lists every
/// offending id.
std::vector<FinetunePair> make_pairs(std::span<const CorpusEntry> entries,
                                     const PromptTemplate& tmpl, const BudgetPolicy& policy);

/// make_pairs() rendered as JSONL with fields "prompt" then "completion".
std::string export_pairs(std::span<const CorpusEntry> entries, const PromptTemplate& tmpl,
                         const BudgetPolicy& policy);

}  // namespace capgen
