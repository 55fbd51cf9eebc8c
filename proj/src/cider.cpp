#include "capgen/cider.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <thread>

#include "capgen/digest.hpp"
#include "capgen/error.hpp"
#include "json.hpp"

namespace capgen {

using json = nlohmann::ordered_json;

DfTable::DfTable(std::size_t n_images, std::vector<Counts> by_order)
    : n_images_(n_images), by_order_(std::move(by_order)) {
  if (n_images_ < 1) throw Error("df table: needs at least one image");
  if (by_order_.empty()) throw Error("df table: needs at least one order");
  for (const auto& counts : by_order_) {
    for (const auto& [gram, count] : counts) {
      if (count < 1 || static_cast<std::size_t>(count) > n_images_) {
        throw Error("df table: document frequency of '" + gram + "' out of range");
      }
    }
  }
}

int DfTable::df(int n, const NGram& gram) const {
  const auto& counts = at(n);
  auto it = counts.find(gram);
  return it == counts.end() ? 0 : it->second;
}

const DfTable::Counts& DfTable::at(int n) const {
  static const Counts kEmpty;
  if (n < 1 || n > max_order()) return kEmpty;
  return by_order_[static_cast<std::size_t>(n - 1)];
}

std::string DfTable::to_json() const {
  json doc;
  doc["n_images"] = n_images_;
  doc["max_order"] = max_order();
  json orders = json::array();
  for (const auto& counts : by_order_) {
    json o = json::object();
    for (const auto& [gram, count] : counts) o[gram] = count;
    orders.push_back(std::move(o));
  }
  doc["df"] = std::move(orders);
  return doc.dump();
}

DfTable DfTable::from_json(std::string_view text) {
  try {
    auto doc = nlohmann::json::parse(text);
    auto n_images = doc.at("n_images").get<std::size_t>();
    const auto& orders = doc.at("df");
    if (!orders.is_array()) throw Error("df table: \"df\" must be an array");
    std::vector<Counts> by_order;
    for (const auto& o : orders) {
      Counts counts;
      for (auto it = o.begin(); it != o.end(); ++it) counts[it.key()] = it.value().get<int>();
      by_order.push_back(std::move(counts));
    }
    if (doc.contains("max_order") && doc["max_order"].get<std::size_t>() != by_order.size()) {
      throw Error("df table: max_order disagrees with the number of orders");
    }
    return DfTable(n_images, std::move(by_order));
  } catch (const nlohmann::json::exception& ex) {
    throw Error(std::string("df table: ") + ex.what());
  }
}

std::string DfTable::provenance() const { return "sha256:" + sha256_hex(to_json()); }

DfTable build_df_table(std::span<const ReferenceSet> reference_sets, int max_order) {
  if (max_order < 1) throw Error("df table: max order must be >= 1");
  if (reference_sets.empty()) throw Error("df table: no reference sets");
  std::vector<DfTable::Counts> by_order(static_cast<std::size_t>(max_order));
  for (const auto& set : reference_sets) {
    if (set.references.empty()) {
      throw Error("df table: image '" + set.image_id + "' has no references");
    }
    // n-grams seen anywhere in this image's references count once.
    std::vector<std::set<NGram>> present(by_order.size());
    for (const auto& ref : set.references) {
      NGramProfile profile(ref, max_order);
      for (int n = 1; n <= max_order; ++n) {
        for (const auto& [gram, count] : profile.at(n)) present[n - 1].insert(gram);
      }
    }
    for (std::size_t k = 0; k < by_order.size(); ++k) {
      for (const auto& gram : present[k]) ++by_order[k][gram];
    }
  }
  return DfTable(reference_sets.size(), std::move(by_order));
}

double TfIdfVector::squared_norm() const {
  double sum = 0.0;
  for (const auto& [gram, w] : weights) sum += w * w;
  return sum;
}

TfIdfVector tfidf_vector(const NGramProfile& sentence, int order, const DfTable& df) {
  TfIdfVector vec;
  vec.order = order;
  const std::size_t total = sentence.total(order);
  if (total == 0) return vec;
  const double n_images = static_cast<double>(df.n_images());
  for (const auto& [gram, count] : sentence.at(order)) {
    const int d = std::max(1, df.df(order, gram));
    const double tf = static_cast<double>(count) / static_cast<double>(total);
    vec.weights.emplace(gram, tf * std::log(n_images / static_cast<double>(d)));
  }
  return vec;
}

double cosine(const TfIdfVector& a, const TfIdfVector& b) {
  const double na = a.squared_norm();
  const double nb = b.squared_norm();
  if (na == 0.0 || nb == 0.0) return 0.0;
  const auto& small = a.weights.size() <= b.weights.size() ? a.weights : b.weights;
  const auto& large = a.weights.size() <= b.weights.size() ? b.weights : a.weights;
  double dot = 0.0;
  for (const auto& [gram, w] : small) {
    auto it = large.find(gram);
    if (it != large.end()) dot += w * it->second;
  }
  // sqrt(x * x) == x in IEEE arithmetic, so identical vectors give exactly 1.
  const double c = dot / std::sqrt(na * nb);
  return std::clamp(c, 0.0, 1.0);
}

double cider_n(const TfIdfVector& candidate, std::span<const TfIdfVector> references) {
  if (references.empty()) throw Error("cider_n: needs at least one reference");
  double sum = 0.0;
  for (const auto& ref : references) sum += cosine(candidate, ref);
  return sum / static_cast<double>(references.size());
}

void CiderConfig::validate() const {
  std::vector<std::string> problems;
  if (max_order < 1) problems.emplace_back("max n-gram order must be >= 1");
  if (!(sigma > 0.0) || !std::isfinite(sigma)) problems.emplace_back("sigma must be a positive number");
  if (!weights.empty()) {
    if (static_cast<int>(weights.size()) != max_order) {
      problems.emplace_back("expected " + std::to_string(max_order) + " order weights, got " +
                            std::to_string(weights.size()));
    }
    if (std::any_of(weights.begin(), weights.end(),
                    [](double w) { return !(w >= 0.0) || !std::isfinite(w); })) {
      problems.emplace_back("order weights must be finite and nonnegative");
    }
  }
  if (cider_d) problems.emplace_back("the CIDEr-D variant is not implemented");
  if (!problems.empty()) {
    std::string msg = "invalid metric configuration:";
    for (const auto& p : problems) msg += "\n  " + p;
    throw ConfigError(msg);
  }
}

std::vector<double> CiderConfig::effective_weights() const {
  if (!weights.empty()) return weights;
  return std::vector<double>(static_cast<std::size_t>(std::max(max_order, 0)),
                             1.0 / static_cast<double>(max_order));
}

CiderScore cider_score(const TokenSeq& candidate, std::span<const TokenSeq> references,
                       const DfTable& df, const CiderConfig& config) {
  config.validate();
  if (df.max_order() < config.max_order) {
    throw Error("cider: df table order " + std::to_string(df.max_order()) +
                " is below the configured order " + std::to_string(config.max_order));
  }
  if (references.empty()) throw Error("cider: needs at least one reference");

  CiderScore result;
  result.empty_candidate = candidate.empty();
  const NGramProfile cand_profile(candidate, config.max_order);
  std::vector<NGramProfile> ref_profiles;
  ref_profiles.reserve(references.size());
  for (const auto& r : references) ref_profiles.emplace_back(r, config.max_order);

  std::vector<TfIdfVector> ref_vectors(references.size());
  for (int n = 1; n <= config.max_order; ++n) {
    const TfIdfVector cand = tfidf_vector(cand_profile, n, df);
    for (std::size_t j = 0; j < ref_profiles.size(); ++j) {
      ref_vectors[j] = tfidf_vector(ref_profiles[j], n, df);
    }
    result.per_order.push_back(cider_n(cand, ref_vectors));
  }

  double combined = 0.0;
  if (config.uniform()) {
    for (double c : result.per_order) combined += c;
    combined /= static_cast<double>(config.max_order);
  } else {
    for (std::size_t k = 0; k < result.per_order.size(); ++k) {
      combined += config.weights[k] * result.per_order[k];
    }
  }
  result.value = std::clamp(config.sigma * combined, 0.0, config.sigma);
  return result;
}

CiderReport corpus_cider(std::span<const ScoringItem> items, const CiderConfig& config,
                         const DfTable* external_df, unsigned threads) {
  config.validate();
  if (items.empty()) throw Error("cider: nothing to score");
  {
    std::set<std::string_view> ids;
    for (const auto& item : items) {
      if (!ids.insert(item.image_id).second) {
        throw Error("cider: duplicate image_id '" + item.image_id + "'");
      }
    }
  }

  DfTable built;
  if (external_df == nullptr) {
    std::vector<ReferenceSet> sets;
    sets.reserve(items.size());
    for (const auto& item : items) sets.push_back({item.image_id, item.references});
    built = build_df_table(sets, config.max_order);
  }
  const DfTable& df = external_df ? *external_df : built;

  std::vector<CiderScore> scores(items.size());
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, items.size()));
  auto work = [&](std::size_t begin, std::size_t step) {
    for (std::size_t i = begin; i < items.size(); i += step) {
      scores[i] = cider_score(items[i].candidate, items[i].references, df, config);
    }
  };
  if (threads <= 1) {
    work(0, 1);
  } else {
    std::vector<std::exception_ptr> errors(threads);
    {
      std::vector<std::jthread> pool;
      for (unsigned t = 0; t < threads; ++t) {
        pool.emplace_back([&, t] {
          try {
            work(t, threads);
          } catch (...) {
            errors[t] = std::current_exception();
          }
        });
      }
    }
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }

  CiderReport report;
  report.config = config;
  report.df_provenance = df.provenance();
  for (std::size_t i = 0; i < items.size(); ++i) {
    report.per_item[items[i].image_id] = scores[i].value;
    report.per_item_orders[items[i].image_id] = scores[i].per_order;
    if (scores[i].empty_candidate) report.empty_candidates.push_back(items[i].image_id);
  }
  std::sort(report.empty_candidates.begin(), report.empty_candidates.end());

  // Accumulate in image id order so the mean does not depend on item order.
  report.per_order_means.assign(static_cast<std::size_t>(config.max_order), 0.0);
  double total = 0.0;
  for (const auto& [id, value] : report.per_item) {
    total += value;
    const auto& orders = report.per_item_orders[id];
    for (std::size_t k = 0; k < orders.size(); ++k) report.per_order_means[k] += orders[k];
  }
  const double count = static_cast<double>(report.per_item.size());
  report.corpus_mean = total / count;
  for (auto& m : report.per_order_means) m /= count;
  return report;
}

}  // namespace capgen
