#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "capgen/corpus.hpp"
#include "capgen/evalrunner.hpp"

namespace capgen::cli {

enum class Command { kStats, kScore, kGenerate, kEval, kExportFinetune, kMergeReports };

std::string_view to_string(Command command);

/// Exit statuses, the tool's only machine-readable contract.
inline constexpr int kExitOk = 0;
inline constexpr int kExitItemFailures = 1;
inline constexpr int kExitConfig = 2;

struct StatsArgs {
  std::filesystem::path corpus;
  CorpusFormat format = CorpusFormat::kCanonicalJsonl;
  std::optional<Split> split;
  bool lenient = false;
};

struct ScoreArgs {
  std::filesystem::path corpus;
  CorpusFormat format = CorpusFormat::kCanonicalJsonl;
  std::filesystem::path candidates;  // JSONL: image_id, caption
  Split split = Split::kTest;
  CiderConfig cider;
  std::optional<std::filesystem::path> df_table;
  std::string label = "candidates";
  ReportFormat report_format = ReportFormat::kTable;
  std::optional<std::filesystem::path> out;
};

struct ExportArgs {
  std::filesystem::path corpus;
  CorpusFormat format = CorpusFormat::kCanonicalJsonl;
  std::size_t k = 100;
  std::uint64_t seed = 0;
  std::string template_name = "default";
  BudgetSettings budget;
  std::optional<std::filesystem::path> out;  // stdout when absent
};

struct MergeArgs {
  std::vector<std::filesystem::path> reports;
  std::optional<std::filesystem::path> out;
};

struct CommandPlan {
  Command command = Command::kStats;
  bool dry_run = false;
  StatsArgs stats;
  ScoreArgs score;
  RunConfig run;  // generate / eval
  ExportArgs export_args;
  MergeArgs merge;
};

/// Thrown by parse_invocation; `exit_code` is 0 for --help.
class UsageError : public std::runtime_error {
 public:
  UsageError(const std::string& message, int exit_code)
      : std::runtime_error(message), exit_code_(exit_code) {}
  int exit_code() const noexcept { return exit_code_; }

 private:
  int exit_code_;
};

/// argv excludes the program name. Config files are loaded and flag
/// overrides applied on top; every validation problem is reported at once.
CommandPlan parse_invocation(const std::vector<std::string>& argv);

struct ExecuteOptions {
  EvalOptions eval;
};

/// Runs a validated plan and maps failures onto exit statuses.
int execute(const CommandPlan& plan, std::ostream& out, std::ostream& err,
            const ExecuteOptions& options = {});

/// parse_invocation + execute with usage errors printed to `err`.
int run(const std::vector<std::string>& argv, std::ostream& out, std::ostream& err,
        const ExecuteOptions& options = {});

}  // namespace capgen::cli
