#include "capgen/finetune.hpp"

#include <algorithm>

#include "capgen/error.hpp"
#include "json.hpp"

namespace capgen {

std::vector<CorpusEntry> sample_training_subset(const Corpus& corpus, std::size_t k, std::uint64_t seed) {
  std::vector<CorpusEntry> train;
  for (const auto& e : corpus.entries()) {
    if (e.split == Split::kTrain) train.push_back(e);
  }
  if (k > train.size()) {
    throw ConfigError("cannot sample " + std::to_string(k) + " entries from a train split of " +
                      std::to_string(train.size()));
  }
  std::sort(train.begin(), train.end(),
            [](const CorpusEntry& a, const CorpusEntry& b) { return a.image_id < b.image_id; });
  seeded_shuffle(train, seed);
  train.resize(k);
  return train;
}

std::string finetune_completion(const CorpusEntry& entry) { return " " + entry.caption + "\n"; }

std::vector<FinetunePair> make_pairs(std::span<const CorpusEntry> entries, const PromptTemplate& tmpl,
                                     const BudgetPolicy& policy) {
  std::vector<FinetunePair> pairs;
  std::vector<std::string> offenders;
  for (const auto& e : entries) {
    try {
      pairs.push_back({fit_budget(e, tmpl, policy).prompt, finetune_completion(e)});
    } catch (const BudgetError& ex) {
      offenders.push_back(ex.image_id());
    }
  }
  if (!offenders.empty()) {
    std::string msg = "export aborted: prompt does not fit the budget for";
    for (const auto& id : offenders) msg += " " + id;
    throw ConfigError(msg);
  }
  return pairs;
}

std::string export_pairs(std::span<const CorpusEntry> entries, const PromptTemplate& tmpl,
                         const BudgetPolicy& policy) {
  std::string out;
  for (const auto& pair : make_pairs(entries, tmpl, policy)) {
    nlohmann::ordered_json obj;
    obj["prompt"] = pair.prompt;
    obj["completion"] = pair.completion;
    out += obj.dump();
    out.push_back('\n');
  }
  return out;
}

}  // namespace capgen
