#pragma once

#include <cstddef>
#include <filesystem>
#include <chrono>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "capgen/cider.hpp"
#include "capgen/fileio.hpp"
#include "capgen/corpus.hpp"
#include "capgen/genclient.hpp"
#include "capgen/promptgen.hpp"

namespace capgen {

enum class FailurePolicy { kAbort, kSkipAndFlag };

struct BackendSettings {
  BackendKind kind = BackendKind::kEcho;
  std::string model_id = "echo";
  std::filesystem::path fixed_map;  // fixed-map only
  HttpBackendConfig http;           // completion-http only
  std::size_t max_in_flight = 4;
  double rate_per_second = 0.0;
  double burst = 1.0;
  RetryPolicy retry;
};

struct BudgetSettings {
  std::size_t context_window = 2048;
  double chars_per_token = 4.0;
  std::size_t reserve_for_completion = 64;

  BudgetPolicy policy() const;
};

/// Declarative description of an evaluation run, normally read from a JSON
/// file. Relative paths are resolved against the file's directory.
struct RunConfig {
  std::filesystem::path corpus;
  CorpusFormat corpus_format = CorpusFormat::kCanonicalJsonl;
  Split split = Split::kTest;
  std::string template_name = "default";  // "default" or a template file path
  std::string model_label;                // row label in tables; defaults to model_id
  BackendSettings backend;
  int max_tokens = 64;
  double temperature = 0.0;
  std::vector<std::string> stop = {"\n"};
  BudgetSettings budget;
  CiderConfig cider;
  std::optional<std::filesystem::path> df_table;  // external DF table (JSON)
  std::filesystem::path output_dir;
  std::optional<std::filesystem::path> cache_dir;  // defaults to <output_dir>/cache
  FailurePolicy failure_policy = FailurePolicy::kSkipAndFlag;

  static RunConfig from_json(std::string_view text, const std::filesystem::path& base_dir);
  static RunConfig load(const std::filesystem::path& path);

  /// Stable JSON snapshot for manifests and provenance.
  std::string to_json() const;

  std::filesystem::path effective_cache_dir() const;
  std::string label() const { return model_label.empty() ? backend.model_id : model_label; }

  /// Checks every referenced asset up front. All problems are reported
  /// together in one ConfigError.
  void validate() const;
};

struct ItemFailure {
  std::string image_id;
  std::string reason;
};

struct GenerationOutcome {
  std::vector<GenerationRecord> records;  // split order, failed items omitted
  std::vector<ItemFailure> failures;
  std::vector<std::string> truncated;     // ids whose context was cut to fit
  std::size_t generated = 0;
  std::size_t cached = 0;
};

/// Builds the backend described by the settings. Throws AuthError when a
/// remote backend lacks credentials.
std::shared_ptr<CompletionBackend> make_backend(const BackendSettings& settings,
                                                const std::filesystem::path& base_dir,
                                                const PromptTemplate& tmpl);

/// Generates a caption for every entry of `split_corpus` through `client`.
/// Under kAbort the first item failure is rethrown; AuthError always
/// propagates. Records come back in corpus order whatever the completion
/// order was.
GenerationOutcome run_generation(const Corpus& split_corpus, const RunConfig& config,
                                 GenerationClient& client);

/// Scores records against the single gold caption of each image. The DF
/// table comes from `external_df` or else from every gold caption in
/// `split_corpus`. Throws Error on an image id missing from the corpus.
CiderReport run_scoring(const std::vector<GenerationRecord>& records, const Corpus& split_corpus,
                        const CiderConfig& config, const DfTable* external_df = nullptr);

struct RunManifest {
  std::string config_json;
  std::string corpus_digest;
  std::size_t split_size = 0;
  std::size_t generated = 0;
  std::size_t cached = 0;
  std::size_t failed = 0;
  std::size_t scored = 0;
  double wall_seconds = 0.0;
  std::filesystem::path report_path;
  std::vector<ItemFailure> failures;
  std::vector<std::string> truncated;

  std::string to_json() const;
};

enum class ReportFormat { kTable, kLineRecords };

/// One labelled result row plus the provenance needed to compare runs.
struct ReportSummary {
  std::string model_label;
  double corpus_mean = 0.0;
  std::size_t n_items = 0;
  std::vector<double> per_order_means;
  CiderConfig config;
  std::string tokenizer;
  std::string df_provenance;
  std::string corpus_digest;
};

ReportSummary summarize(const CiderReport& report, const std::string& model_label,
                        const std::string& corpus_digest);

/// Table: "<label>  <mean with 2 decimals>" rows under a header, then a
/// provenance footer. Line records: one JSON object per item then a
/// {"summary": ...} record.
std::string emit_report(const CiderReport& report, const RunManifest& manifest,
                        const std::string& model_label, ReportFormat format);

/// Rows sorted by descending score, then label.
std::string render_table(std::vector<ReportSummary> rows);

struct ParsedReport {
  std::map<std::string, double> per_item;
  ReportSummary summary;
};

/// Reads line-record output back.
ParsedReport parse_line_records(std::string_view text);

/// Merges line-record reports into one table. Throws ConfigError when the
/// metric configuration, tokenizer or DF provenance differ between inputs.
std::string merge_reports(const std::vector<ParsedReport>& reports);

struct EvalOptions {
  /// Replaces the configured backend (tests, dry offline runs).
  std::shared_ptr<CompletionBackend> backend_override;
  /// Skip scoring and report writing (the `generate` command).
  bool generate_only = false;
  std::function<void(std::chrono::nanoseconds)> sleeper;
};

struct EvalResult {
  RunManifest manifest;
  std::optional<CiderReport> report;
  std::filesystem::path table_path;
  std::filesystem::path records_path;
};

/// Full pipeline: load, filter, generate, score, then write
/// manifest.json, generations.jsonl, scores.jsonl and report.txt atomically
/// under output_dir. Under kAbort an item failure throws GenerationFailed
/// before anything but the cache is written.
EvalResult run_eval(const RunConfig& config, const EvalOptions& options = {});

}  // namespace capgen
