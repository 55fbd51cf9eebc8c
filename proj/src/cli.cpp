#include "capgen/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <iostream>
#include <set>

#include "CLI11.hpp"
#include "capgen/error.hpp"
#include "capgen/finetune.hpp"
#include "json.hpp"

namespace capgen::cli {

namespace fs = std::filesystem;

std::string_view to_string(Command command) {
  switch (command) {
    case Command::kStats: return "stats";
    case Command::kScore: return "score";
    case Command::kGenerate: return "generate";
    case Command::kEval: return "eval";
    case Command::kExportFinetune: return "export-finetune";
    case Command::kMergeReports: return "merge-reports";
  }
  return "?";
}

namespace {

std::string fmt2(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

void join_problems(const std::vector<std::string>& problems, const std::string& usage) {
  if (problems.empty()) return;
  std::string msg;
  for (const auto& p : problems) msg += "error: " + p + "\n";
  throw UsageError(msg + "\n" + usage, kExitConfig);
}

}  // namespace

CommandPlan parse_invocation(const std::vector<std::string>& argv) {
  CLI::App app{"Caption generation from description and context, scored with CIDEr", "capgen"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every command");

  std::string corpus_format = "canonical-jsonl";
  std::string split_label;
  std::string config_path;
  bool dry_run = false;
  std::optional<double> sigma;
  std::optional<int> max_n;

  CommandPlan plan;

  auto* stats = app.add_subcommand("stats", "Per-split corpus statistics");
  std::string stats_corpus;
  stats->add_option("--corpus", stats_corpus, "Corpus file")->required();
  stats->add_option("--split", split_label, "Only this split (train, val, test)");
  stats->add_option("--corpus-format", corpus_format, "canonical-jsonl or concadia-adapter");
  stats->add_flag("--lenient", plan.stats.lenient, "Skip invalid records with a warning");

  auto* score = app.add_subcommand("score", "Score pre-generated captions against the gold captions");
  std::string score_corpus, candidates, df_table, report_format = "table", score_out;
  score->add_option("--corpus", score_corpus, "Corpus file")->required();
  score->add_option("--candidates", candidates, "JSONL with image_id and caption")->required();
  score->add_option("--split", split_label, "Split to score (default test)");
  score->add_option("--corpus-format", corpus_format, "canonical-jsonl or concadia-adapter");
  score->add_option("--sigma", sigma, "Score scale factor (default 10)");
  score->add_option("--max-n", max_n, "Maximum n-gram order (default 4)");
  score->add_option("--df-table", df_table, "External document-frequency table (JSON)");
  score->add_option("--label", plan.score.label, "Row label in the table");
  score->add_option("--format", report_format, "table or line-records");
  score->add_option("--out", score_out, "Write the report here instead of stdout");

  auto* generate = app.add_subcommand("generate", "Generate captions for a split (no scoring)");
  auto* eval = app.add_subcommand("eval", "Generate, score and write the report");
  std::string output_dir;
  for (auto* sub : {generate, eval}) {
    sub->add_option("--config", config_path, "Run config (JSON)")->required();
    sub->add_flag("--dry-run", dry_run, "Validate and print the plan without side effects");
    sub->add_option("--split", split_label, "Override the configured split");
    sub->add_option("--output-dir", output_dir, "Override the output directory");
    sub->add_option("--sigma", sigma, "Override the score scale factor");
    sub->add_option("--max-n", max_n, "Override the maximum n-gram order");
  }

  auto* exp = app.add_subcommand("export-finetune", "Sample train entries and export prompt/completion pairs");
  std::string exp_corpus, exp_out, exp_template;
  std::optional<std::size_t> window;
  exp->add_option("--corpus", exp_corpus, "Corpus file (or take it from --config)");
  exp->add_option("--config", config_path, "Run config supplying corpus, template and budget");
  exp->add_option("--k", plan.export_args.k, "Number of entries (default 100)");
  exp->add_option("--seed", plan.export_args.seed, "Sampling seed")->required();
  exp->add_option("--out", exp_out, "Output JSONL (default stdout)");
  exp->add_option("--template", exp_template, "Template file or 'default'");
  exp->add_option("--context-window", window, "Model context window in tokens (default 2048)");
  exp->add_option("--corpus-format", corpus_format, "canonical-jsonl or concadia-adapter");

  auto* merge = app.add_subcommand("merge-reports", "Merge line-record reports into one table");
  std::vector<std::string> merge_inputs;
  std::string merge_out;
  merge->add_option("reports", merge_inputs, "Line-record report files")->required();
  merge->add_option("--out", merge_out, "Write the table here instead of stdout");

  std::vector<std::string> reversed(argv.rbegin(), argv.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    throw UsageError(app.help(), kExitOk);
  } catch (const CLI::CallForAllHelp&) {
    throw UsageError(app.help("", CLI::AppFormatMode::All), kExitOk);
  } catch (const CLI::ParseError& ex) {
    const auto* active = app.get_subcommands().empty() ? &app : app.get_subcommands().front();
    throw UsageError("error: " + std::string(ex.what()) + "\n\n" + active->help(), kExitConfig);
  }

  auto* chosen = app.get_subcommands().front();
  const std::string usage = chosen->help();
  std::vector<std::string> problems;
  plan.dry_run = dry_run;

  auto format = parse_corpus_format(corpus_format);
  if (!format) problems.push_back("unknown corpus format '" + corpus_format + "'");
  std::optional<Split> split;
  if (!split_label.empty()) {
    split = parse_split(split_label);
    if (!split) problems.push_back("unknown split '" + split_label + "'");
  }
  auto require_file = [&](const std::string& path, const char* what) {
    std::error_code ec;
    if (!fs::is_regular_file(path, ec)) problems.push_back(std::string(what) + " not found: " + path);
  };
  auto apply_metric_overrides = [&](CiderConfig& c) {
    if (sigma) c.sigma = *sigma;
    if (max_n) c.max_order = *max_n;
    try {
      c.validate();
    } catch (const ConfigError& ex) {
      problems.emplace_back(ex.what());
    }
  };

  if (chosen == stats) {
    plan.command = Command::kStats;
    plan.stats.corpus = stats_corpus;
    plan.stats.format = format.value_or(CorpusFormat::kCanonicalJsonl);
    plan.stats.split = split;
    require_file(stats_corpus, "corpus");
  } else if (chosen == score) {
    plan.command = Command::kScore;
    auto& s = plan.score;
    s.corpus = score_corpus;
    s.format = format.value_or(CorpusFormat::kCanonicalJsonl);
    s.candidates = candidates;
    s.split = split.value_or(Split::kTest);
    require_file(score_corpus, "corpus");
    require_file(candidates, "candidates file");
    if (!df_table.empty()) {
      s.df_table = df_table;
      require_file(df_table, "df table");
    }
    if (report_format == "table") s.report_format = ReportFormat::kTable;
    else if (report_format == "line-records") s.report_format = ReportFormat::kLineRecords;
    else problems.push_back("unknown report format '" + report_format + "'");
    if (!score_out.empty()) s.out = score_out;
    apply_metric_overrides(s.cider);
  } else if (chosen == generate || chosen == eval) {
    plan.command = chosen == eval ? Command::kEval : Command::kGenerate;
    try {
      plan.run = RunConfig::load(config_path);
      if (split) plan.run.split = *split;
      if (!output_dir.empty()) plan.run.output_dir = output_dir;
      apply_metric_overrides(plan.run.cider);
      plan.run.validate();
    } catch (const Error& ex) {
      problems.emplace_back(ex.what());
    }
  } else if (chosen == exp) {
    plan.command = Command::kExportFinetune;
    auto& e = plan.export_args;
    e.format = format.value_or(CorpusFormat::kCanonicalJsonl);
    if (!config_path.empty()) {
      try {
        auto run = RunConfig::load(config_path);
        e.corpus = run.corpus;
        e.format = run.corpus_format;
        e.template_name = run.template_name;
        e.budget = run.budget;
      } catch (const Error& ex) {
        problems.emplace_back(ex.what());
      }
    }
    if (!exp_corpus.empty()) e.corpus = exp_corpus;
    if (!exp_template.empty()) e.template_name = exp_template;
    if (window) e.budget.context_window = *window;
    if (!exp_out.empty()) e.out = exp_out;
    if (e.corpus.empty()) problems.emplace_back("--corpus (or --config) is required");
    else require_file(e.corpus.string(), "corpus");
    try {
      PromptTemplate::resolve(e.template_name);
      e.budget.policy();
    } catch (const Error& ex) {
      problems.emplace_back(ex.what());
    }
  } else {
    plan.command = Command::kMergeReports;
    for (const auto& r : merge_inputs) {
      require_file(r, "report");
      plan.merge.reports.emplace_back(r);
    }
    if (!merge_out.empty()) plan.merge.out = merge_out;
  }
  join_problems(problems, usage);
  return plan;
}

namespace {

void emit(const std::optional<fs::path>& out_path, std::ostream& out, const std::string& text) {
  if (out_path) write_file_atomic(*out_path, text);
  else out << text;
}

int run_stats(const StatsArgs& args, std::ostream& out, std::ostream& err) {
  auto parsed = load_corpus(args.corpus.string(), args.format,
                            args.lenient ? ParseMode::kLenient : ParseMode::kStrict);
  for (const auto& w : parsed.warnings) err << "warning: " << w << "\n";
  out << "split  entries  articles  mean_caption_tokens  mean_description_tokens\n";
  for (const auto& row : corpus_stats(parsed.corpus)) {
    if (args.split && row.split != *args.split) continue;
    auto cell = [](const std::optional<double>& v) { return v ? fmt2(*v) : std::string("-"); };
    char line[160];
    std::snprintf(line, sizeof line, "%-5s  %7zu  %8zu  %19s  %23s\n", std::string(to_string(row.split)).c_str(),
                  row.n_entries, row.n_articles, cell(row.mean_caption_tokens).c_str(),
                  cell(row.mean_description_tokens).c_str());
    out << line;
  }
  out << "# tokenizer=" << kTokenizerId << " corpus=" << parsed.corpus.source_digest() << "\n";
  return kExitOk;
}

int run_score(const ScoreArgs& args, std::ostream& out, std::ostream& err) {
  const auto corpus = load_corpus(args.corpus.string(), args.format).corpus;
  const auto split_corpus = filter_split(corpus, args.split);
  std::vector<GenerationRecord> records;
  std::set<std::string> seen;
  const std::string bytes = read_file(args.candidates);
  std::size_t pos = 0, line_no = 0;
  while (pos < bytes.size()) {
    auto end = bytes.find('\n', pos);
    if (end == std::string::npos) end = bytes.size();
    const std::string line = bytes.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    GenerationRecord r;
    try {
      auto obj = nlohmann::json::parse(line);
      r.image_id = obj.at("image_id").get<std::string>();
      r.caption = obj.at("caption").get<std::string>();
    } catch (const nlohmann::json::exception& ex) {
      throw ConfigError("candidates line " + std::to_string(line_no) + ": " + ex.what());
    }
    if (!seen.insert(r.image_id).second) throw ConfigError("candidates: duplicate image_id '" + r.image_id + "'");
    if (!split_corpus.find(r.image_id)) {
      throw ConfigError("candidates: '" + r.image_id + "' is not in the " + std::string(to_string(args.split)) +
                        " split");
    }
    records.push_back(std::move(r));
  }
  if (records.empty()) throw ConfigError("candidates file has no records");
  if (records.size() < split_corpus.size()) {
    err << "note: " << split_corpus.size() - records.size() << " split entries have no candidate\n";
  }
  std::optional<DfTable> df;
  if (args.df_table) df = DfTable::from_json(read_file(*args.df_table));
  const auto report = run_scoring(records, split_corpus, args.cider, df ? &*df : nullptr);
  RunManifest manifest;
  manifest.corpus_digest = split_corpus.source_digest();
  emit(args.out, out, emit_report(report, manifest, args.label, args.report_format));
  return kExitOk;
}

int run_pipeline(const CommandPlan& plan, std::ostream& out, std::ostream& err, const ExecuteOptions& options) {
  if (plan.dry_run) {
    out << "dry run: " << to_string(plan.command) << " plan validated, nothing executed\n"
        << plan.run.to_json() << "\n";
    return kExitOk;
  }
  EvalOptions eval = options.eval;
  eval.generate_only = plan.command == Command::kGenerate;
  const auto result = run_eval(plan.run, eval);
  const auto& m = result.manifest;
  err << "items=" << m.split_size << " generated=" << m.generated << " cached=" << m.cached
      << " failed=" << m.failed << " scored=" << m.scored << "\n";
  for (const auto& f : m.failures) err << "failed: " << f.reason << "\n";
  if (result.report) out << read_file(result.table_path);
  return m.failed > 0 ? kExitItemFailures : kExitOk;
}

int run_export(const ExportArgs& args, std::ostream& out) {
  const auto corpus = load_corpus(args.corpus.string(), args.format).corpus;
  const auto sample = sample_training_subset(corpus, args.k, args.seed);
  emit(args.out, out,
       export_pairs(sample, PromptTemplate::resolve(args.template_name), args.budget.policy()));
  return kExitOk;
}

int run_merge(const MergeArgs& args, std::ostream& out) {
  std::vector<ParsedReport> reports;
  for (const auto& p : args.reports) reports.push_back(parse_line_records(read_file(p)));
  emit(args.out, out, merge_reports(reports));
  return kExitOk;
}

}  // namespace

int execute(const CommandPlan& plan, std::ostream& out, std::ostream& err, const ExecuteOptions& options) {
  try {
    switch (plan.command) {
      case Command::kStats: return run_stats(plan.stats, out, err);
      case Command::kScore: return run_score(plan.score, out, err);
      case Command::kGenerate:
      case Command::kEval: return run_pipeline(plan, out, err, options);
      case Command::kExportFinetune: return run_export(plan.export_args, out);
      case Command::kMergeReports: return run_merge(plan.merge, out);
    }
  } catch (const AuthError& ex) {
    err << "authentication failed: " << ex.what() << "\n";
    return kExitConfig;
  } catch (const GenerationFailed& ex) {
    err << "aborted: " << ex.what() << "\n";
    return kExitItemFailures;
  } catch (const BudgetError& ex) {
    err << "aborted: " << ex.what() << "\n";
    return kExitItemFailures;
  } catch (const std::exception& ex) {
    err << "error: " << ex.what() << "\n";
    return kExitConfig;
  }
  return kExitConfig;
}

int run(const std::vector<std::string>& argv, std::ostream& out, std::ostream& err, const ExecuteOptions& options) {
  CommandPlan plan;
  try {
    plan = parse_invocation(argv);
  } catch (const UsageError& ex) {
    (ex.exit_code() == kExitOk ? out : err) << ex.what();
    return ex.exit_code();
  }
  return execute(plan, out, err, options);
}

}  // namespace capgen::cli
