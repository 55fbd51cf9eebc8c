#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "capgen/textnorm.hpp"

namespace capgen {

/// The reference sentences attached to one image.
struct ReferenceSet {
  std::string image_id;
  std::vector<TokenSeq> references;
};

/// Document frequencies over a collection of reference sets: for each order
/// and n-gram, the number of images whose references contain it at least
/// once. Immutable once built.
class DfTable {
 public:
  using Counts = std::map<NGram, int>;

  DfTable() = default;

  /// Throws Error if an invariant (1 <= df <= n_images, n_images >= 1) fails.
  DfTable(std::size_t n_images, std::vector<Counts> by_order);

  std::size_t n_images() const noexcept { return n_images_; }
  int max_order() const noexcept { return static_cast<int>(by_order_.size()); }

  /// Document frequency of `gram` at order n; 0 when unseen.
  int df(int n, const NGram& gram) const;
  const Counts& at(int n) const;

  /// Canonical JSON rendering; also the input of provenance().
  std::string to_json() const;
  static DfTable from_json(std::string_view text);

  /// SHA-256 of to_json(), prefixed "sha256:".
  std::string provenance() const;

  bool operator==(const DfTable&) const = default;

 private:
  std::size_t n_images_ = 0;
  std::vector<Counts> by_order_;
};

/// Requires at least one image and at least one reference per image;
/// otherwise throws Error naming the offending image.
DfTable build_df_table(std::span<const ReferenceSet> reference_sets, int max_order);

/// Sparse TF-IDF weights of one sentence at one order.
struct TfIdfVector {
  int order = 1;
  std::map<NGram, double> weights;

  double squared_norm() const;
};

/// weight(w) = count(w) / total(order) * ln(n_images / max(1, df(w))).
/// N-grams the DF table has never seen count as df = 1 (rarest possible).
TfIdfVector tfidf_vector(const NGramProfile& sentence, int order, const DfTable& df);

/// Cosine of two nonnegative sparse vectors, clamped into [0, 1]; exactly 0
/// when either vector has zero magnitude.
double cosine(const TfIdfVector& a, const TfIdfVector& b);

/// Mean cosine between the candidate and each reference. Requires at least
/// one reference.
double cider_n(const TfIdfVector& candidate, std::span<const TfIdfVector> references);

enum class LogBase { kNatural };

struct CiderConfig {
  int max_order = kDefaultMaxOrder;
  /// Per-order weights; empty means uniform 1/max_order.
  std::vector<double> weights;
  double sigma = 10.0;
  LogBase log_base = LogBase::kNatural;
  /// Reserved for the clipped/length-penalized variant; must stay false.
  bool cider_d = false;

  /// Throws ConfigError on N < 1, sigma <= 0, weight count or sign problems,
  /// or cider_d requested.
  void validate() const;
  bool uniform() const noexcept { return weights.empty(); }
  std::vector<double> effective_weights() const;

  bool operator==(const CiderConfig&) const = default;
};

struct CiderScore {
  double value = 0.0;              // in [0, sigma]
  std::vector<double> per_order;   // CIDEr_n for n = 1..N, each in [0, 1]
  bool empty_candidate = false;
};

/// sigma * sum_n w_n * CIDEr_n(candidate, references). With uniform weights
/// the combination is computed as sigma * mean_n CIDEr_n so that a perfect
/// match scores exactly sigma. Requires df.max_order() >= config.max_order
/// and at least one reference.
CiderScore cider_score(const TokenSeq& candidate, std::span<const TokenSeq> references,
                       const DfTable& df, const CiderConfig& config);

struct ScoringItem {
  std::string image_id;
  TokenSeq candidate;
  std::vector<TokenSeq> references;
};

struct CiderReport {
  std::map<std::string, double> per_item;
  std::map<std::string, std::vector<double>> per_item_orders;
  std::vector<double> per_order_means;
  double corpus_mean = 0.0;
  CiderConfig config;
  std::string df_provenance;
  std::vector<std::string> empty_candidates;
};

/// Scores every item. The DF table comes from `external_df` when given,
/// otherwise from the references of all items. Means are taken over items in
/// image id order, so the result does not depend on the order of `items`.
/// Throws Error on an empty item list or duplicate image ids.
CiderReport corpus_cider(std::span<const ScoringItem> items, const CiderConfig& config,
                         const DfTable* external_df = nullptr, unsigned threads = 0);

}  // namespace capgen
