#include "capgen/evalrunner.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cstdio>
#include <exception>
#include <set>
#include <thread>

#include "capgen/error.hpp"
#include "capgen/textnorm.hpp"
#include "json.hpp"

namespace capgen {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;
namespace fs = std::filesystem;

namespace {

std::string shortest(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

std::string fixed2(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

// Reads typed values out of a JSON object, collecting problems instead of
// stopping at the first one, and rejecting keys nobody asked about.
class Reader {
 public:
  Reader(const json& obj, std::string where, std::vector<std::string>& problems)
      : obj_(obj), where_(std::move(where)), problems_(problems) {
    if (!obj_.is_object()) problems_.push_back(where_ + ": expected an object");
  }

  ~Reader() {
    if (!obj_.is_object()) return;
    for (auto it = obj_.begin(); it != obj_.end(); ++it) {
      if (!seen_.count(it.key())) problems_.push_back(where_ + ": unknown key '" + it.key() + "'");
    }
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!obj_.is_object() || !obj_.contains(key)) return;
    try {
      out = obj_.at(key).get<T>();
    } catch (const json::exception&) {
      problems_.push_back(where_ + ": '" + key + "' has the wrong type");
    }
  }

  const json* child(const char* key) {
    seen_.insert(key);
    if (!obj_.is_object() || !obj_.contains(key)) return nullptr;
    return &obj_.at(key);
  }

  std::string at(const char* key) const { return where_ + "." + key; }

 private:
  const json& obj_;
  std::string where_;
  std::vector<std::string>& problems_;
  std::set<std::string> seen_;
};

fs::path resolve(const fs::path& base, const std::string& p) {
  if (p.empty()) return {};
  fs::path path(p);
  return path.is_absolute() ? path : (base / path).lexically_normal();
}

std::string_view to_string(FailurePolicy p) {
  return p == FailurePolicy::kAbort ? "abort" : "skip-and-flag";
}

ojson cider_config_json(const CiderConfig& c) {
  ojson obj;
  obj["max_n"] = c.max_order;
  if (c.uniform()) obj["weights"] = "uniform";
  else obj["weights"] = c.weights;
  obj["sigma"] = c.sigma;
  obj["log_base"] = "natural";
  obj["cider_d"] = c.cider_d;
  return obj;
}

CiderConfig cider_config_from(const json& obj) {
  CiderConfig c;
  c.max_order = obj.at("max_n").get<int>();
  if (obj.at("weights").is_array()) c.weights = obj.at("weights").get<std::vector<double>>();
  c.sigma = obj.at("sigma").get<double>();
  if (obj.value("log_base", std::string("natural")) != "natural") {
    throw ConfigError("unsupported log base in report");
  }
  c.cider_d = obj.value("cider_d", false);
  return c;
}

}  // namespace

BudgetPolicy BudgetSettings::policy() const {
  return BudgetPolicy::for_window(context_window, chars_per_token, reserve_for_completion);
}

RunConfig RunConfig::from_json(std::string_view text, const fs::path& base_dir) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& ex) {
    throw ConfigError(std::string("run config is not valid JSON: ") + ex.what());
  }
  RunConfig cfg;
  std::vector<std::string> problems;
  {
    Reader top(doc, "config", problems);
    std::string corpus, format = "canonical-jsonl", split = "test", output_dir, cache_dir, policy = "skip-and-flag";
    top.get("corpus", corpus);
    top.get("corpus_format", format);
    top.get("split", split);
    top.get("template", cfg.template_name);
    top.get("model_label", cfg.model_label);
    top.get("output_dir", output_dir);
    top.get("cache_dir", cache_dir);
    top.get("failure_policy", policy);

    if (corpus.empty()) problems.emplace_back("config: 'corpus' is required");
    cfg.corpus = resolve(base_dir, corpus);
    if (auto f = parse_corpus_format(format)) cfg.corpus_format = *f;
    else problems.push_back("config: unknown corpus_format '" + format + "'");
    if (auto s = parse_split(split)) cfg.split = *s;
    else problems.push_back("config: unknown split '" + split + "'");
    if (cfg.template_name != "default" && !cfg.template_name.empty()) {
      cfg.template_name = resolve(base_dir, cfg.template_name).string();
    }
    if (output_dir.empty()) problems.emplace_back("config: 'output_dir' is required");
    cfg.output_dir = resolve(base_dir, output_dir);
    if (!cache_dir.empty()) cfg.cache_dir = resolve(base_dir, cache_dir);
    if (policy == "abort") cfg.failure_policy = FailurePolicy::kAbort;
    else if (policy == "skip-and-flag") cfg.failure_policy = FailurePolicy::kSkipAndFlag;
    else problems.push_back("config: unknown failure_policy '" + policy + "'");

    if (const json* b = top.child("backend")) {
      Reader r(*b, top.at("backend"), problems);
      std::string kind = "echo", fixed_map;
      r.get("kind", kind);
      if (auto k = parse_backend_kind(kind)) cfg.backend.kind = *k;
      else problems.push_back("config.backend: unknown kind '" + kind + "'");
      cfg.backend.model_id = kind;
      r.get("model_id", cfg.backend.model_id);
      r.get("fixed_map", fixed_map);
      cfg.backend.fixed_map = resolve(base_dir, fixed_map);
      auto& http = cfg.backend.http;
      r.get("endpoint", http.endpoint);
      r.get("response_pointer", http.response_pointer);
      r.get("auth_header", http.auth_header);
      r.get("auth_prefix", http.auth_prefix);
      r.get("api_key_env", http.api_key_env);
      r.get("timeout_seconds", http.timeout_seconds);
      r.get("max_in_flight", cfg.backend.max_in_flight);
      r.get("rate_per_second", cfg.backend.rate_per_second);
      r.get("burst", cfg.backend.burst);
      if (const json* f = r.child("request_fields")) {
        Reader fr(*f, r.at("request_fields"), problems);
        fr.get("prompt", http.prompt_field);
        fr.get("model", http.model_field);
        fr.get("max_tokens", http.max_tokens_field);
        fr.get("temperature", http.temperature_field);
        fr.get("stop", http.stop_field);
      }
      if (const json* rp = r.child("retry")) {
        Reader rr(*rp, r.at("retry"), problems);
        long long initial = cfg.backend.retry.initial_backoff.count();
        long long max = cfg.backend.retry.max_backoff.count();
        rr.get("max_attempts", cfg.backend.retry.max_attempts);
        rr.get("initial_backoff_ms", initial);
        rr.get("multiplier", cfg.backend.retry.multiplier);
        rr.get("max_backoff_ms", max);
        cfg.backend.retry.initial_backoff = std::chrono::milliseconds(initial);
        cfg.backend.retry.max_backoff = std::chrono::milliseconds(max);
      }
    }
    if (const json* g = top.child("generation")) {
      Reader r(*g, top.at("generation"), problems);
      r.get("max_tokens", cfg.max_tokens);
      r.get("temperature", cfg.temperature);
      r.get("stop", cfg.stop);
    }
    if (const json* b = top.child("budget")) {
      Reader r(*b, top.at("budget"), problems);
      r.get("context_window", cfg.budget.context_window);
      r.get("chars_per_token", cfg.budget.chars_per_token);
      r.get("reserve_for_completion", cfg.budget.reserve_for_completion);
    }
    if (const json* c = top.child("cider")) {
      Reader r(*c, top.at("cider"), problems);
      std::string df_table;
      r.get("max_n", cfg.cider.max_order);
      if (const json* w = r.child("weights"); w && !(w->is_string() && *w == "uniform")) {
        r.get("weights", cfg.cider.weights);
      }
      std::string log_base = "natural";
      r.get("log_base", log_base);
      if (log_base != "natural") problems.push_back("config.cider: unsupported log_base '" + log_base + "'");
      r.get("sigma", cfg.cider.sigma);
      r.get("cider_d", cfg.cider.cider_d);
      r.get("df_table", df_table);
      if (!df_table.empty()) cfg.df_table = resolve(base_dir, df_table);
    }
  }
  if (!problems.empty()) {
    std::string msg = "invalid run config:";
    for (const auto& p : problems) msg += "\n  " + p;
    throw ConfigError(msg);
  }
  return cfg;
}

RunConfig RunConfig::load(const fs::path& path) {
  return from_json(read_file(path), path.has_parent_path() ? path.parent_path() : fs::path("."));
}

std::string RunConfig::to_json() const {
  ojson doc;
  doc["corpus"] = corpus.string();
  doc["corpus_format"] = corpus_format == CorpusFormat::kCanonicalJsonl ? "canonical-jsonl" : "concadia-adapter";
  doc["split"] = std::string(capgen::to_string(split));
  doc["template"] = template_name;
  doc["model_label"] = label();
  ojson b;
  b["kind"] = std::string(capgen::to_string(backend.kind));
  b["model_id"] = backend.model_id;
  if (backend.kind == BackendKind::kFixedMap) b["fixed_map"] = backend.fixed_map.string();
  if (backend.kind == BackendKind::kCompletionHttp) {
    b["endpoint"] = backend.http.endpoint;
    b["request_fields"] = {{"prompt", backend.http.prompt_field},
                           {"model", backend.http.model_field},
                           {"max_tokens", backend.http.max_tokens_field},
                           {"temperature", backend.http.temperature_field},
                           {"stop", backend.http.stop_field}};
    b["response_pointer"] = backend.http.response_pointer;
    b["api_key_env"] = backend.http.api_key_env;
  }
  b["max_in_flight"] = backend.max_in_flight;
  b["rate_per_second"] = backend.rate_per_second;
  b["retry"] = {{"max_attempts", backend.retry.max_attempts},
                {"initial_backoff_ms", backend.retry.initial_backoff.count()},
                {"multiplier", backend.retry.multiplier},
                {"max_backoff_ms", backend.retry.max_backoff.count()}};
  doc["backend"] = std::move(b);
  doc["generation"] = {{"max_tokens", max_tokens}, {"temperature", temperature}, {"stop", stop}};
  doc["budget"] = {{"context_window", budget.context_window},
                   {"chars_per_token", budget.chars_per_token},
                   {"reserve_for_completion", budget.reserve_for_completion}};
  auto c = cider_config_json(cider);
  if (df_table) c["df_table"] = df_table->string();
  doc["cider"] = std::move(c);
  doc["output_dir"] = output_dir.string();
  doc["cache_dir"] = effective_cache_dir().string();
  doc["failure_policy"] = std::string(to_string(failure_policy));
  return doc.dump(2);
}

fs::path RunConfig::effective_cache_dir() const { return cache_dir ? *cache_dir : output_dir / "cache"; }

void RunConfig::validate() const {
  std::vector<std::string> problems;
  auto check = [&](auto&& fn) {
    try {
      fn();
    } catch (const Error& ex) {
      problems.emplace_back(ex.what());
    }
  };
  std::error_code ec;
  if (!fs::is_regular_file(corpus, ec)) problems.push_back("corpus file not found: " + corpus.string());
  check([&] { PromptTemplate::resolve(template_name); });
  if (backend.kind == BackendKind::kFixedMap && !fs::is_regular_file(backend.fixed_map, ec)) {
    problems.push_back("fixed map not found: " + backend.fixed_map.string());
  }
  if (backend.kind == BackendKind::kCompletionHttp && backend.http.endpoint.empty()) {
    problems.emplace_back("completion-http backend needs an endpoint");
  }
  if (backend.model_id.empty()) problems.emplace_back("backend model_id must not be empty");
  if (backend.retry.max_attempts < 1) problems.emplace_back("retry.max_attempts must be >= 1");
  if (df_table && !fs::is_regular_file(*df_table, ec)) {
    problems.push_back("df table not found: " + df_table->string());
  }
  if (output_dir.empty()) problems.emplace_back("output_dir must be set");
  check([&] { budget.policy(); });
  check([&] { cider.validate(); });
  check([&] {
    GenerationRequest r;
    r.max_tokens = max_tokens;
    r.temperature = temperature;
    r.validate();
  });
  if (!problems.empty()) {
    std::string msg = "invalid run config:";
    for (const auto& p : problems) msg += "\n  " + p;
    throw ConfigError(msg);
  }
}

std::shared_ptr<CompletionBackend> make_backend(const BackendSettings& settings, const fs::path&,
                                                const PromptTemplate& tmpl) {
  switch (settings.kind) {
    case BackendKind::kEcho:
      return std::make_shared<EchoBackend>(tmpl);
    case BackendKind::kFixedMap:
      return std::make_shared<FixedMapBackend>(FixedMapBackend::load(settings.fixed_map.string()));
    case BackendKind::kCompletionHttp:
      return HttpBackend::from_environment(settings.http);
  }
  throw ConfigError("unknown backend");
}

GenerationOutcome run_generation(const Corpus& split_corpus, const RunConfig& config,
                                 GenerationClient& client) {
  const auto tmpl = PromptTemplate::resolve(config.template_name);
  const auto policy = config.budget.policy();
  const auto& entries = split_corpus.entries();
  const std::size_t n = entries.size();

  struct Slot {
    std::optional<GenerationRecord> record;
    std::optional<std::string> failure;
    bool truncated = false;
  };
  std::vector<Slot> slots(n);
  std::atomic<std::size_t> next{0};
  std::atomic<bool> stop{false};
  std::exception_ptr fatal;
  std::mutex fatal_mutex;

  auto set_fatal = [&](std::exception_ptr e) {
    std::lock_guard lock(fatal_mutex);
    if (!fatal) fatal = e;
    stop = true;
  };

  auto worker = [&] {
    for (;;) {
      if (stop) return;
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      const auto& entry = entries[i];
      try {
        auto fitted = fit_budget(entry, tmpl, policy);
        slots[i].truncated = fitted.truncated;
        GenerationRequest request;
        request.backend = config.backend.kind;
        request.model_id = config.backend.model_id;
        request.prompt = std::move(fitted.prompt);
        request.max_tokens = config.max_tokens;
        request.temperature = config.temperature;
        request.stop = config.stop;
        slots[i].record = client.complete(request, entry.image_id);
      } catch (const AuthError&) {
        set_fatal(std::current_exception());
      } catch (const BudgetError& ex) {
        slots[i].failure = std::string("unscoreable: ") + ex.what();
        if (config.failure_policy == FailurePolicy::kAbort) set_fatal(std::current_exception());
      } catch (const GenerationFailed& ex) {
        slots[i].failure = ex.what();
        if (config.failure_policy == FailurePolicy::kAbort) set_fatal(std::current_exception());
      } catch (...) {
        set_fatal(std::current_exception());
      }
    }
  };

  const std::size_t workers = std::max<std::size_t>(1, std::min(config.backend.max_in_flight, n));
  {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < workers; ++t) pool.emplace_back(worker);
  }
  if (fatal) std::rethrow_exception(fatal);

  GenerationOutcome outcome;
  for (std::size_t i = 0; i < n; ++i) {
    if (slots[i].truncated) outcome.truncated.push_back(entries[i].image_id);
    if (slots[i].failure) {
      outcome.failures.push_back({entries[i].image_id, *slots[i].failure});
      continue;
    }
    auto& rec = *slots[i].record;
    if (rec.from_cache) ++outcome.cached;
    else ++outcome.generated;
    outcome.records.push_back(std::move(rec));
  }
  return outcome;
}

CiderReport run_scoring(const std::vector<GenerationRecord>& records, const Corpus& split_corpus,
                        const CiderConfig& config, const DfTable* external_df) {
  config.validate();
  std::map<std::string_view, TokenSeq> gold;
  std::vector<ReferenceSet> sets;
  sets.reserve(split_corpus.size());
  for (const auto& e : split_corpus.entries()) {
    auto tokens = tokenize(e.caption);
    gold.emplace(e.image_id, tokens);
    sets.push_back({e.image_id, {std::move(tokens)}});
  }
  std::vector<ScoringItem> items;
  items.reserve(records.size());
  for (const auto& r : records) {
    auto it = gold.find(r.image_id);
    if (it == gold.end()) throw Error("scoring: unknown image_id '" + r.image_id + "'");
    items.push_back({r.image_id, tokenize(r.caption), {it->second}});
  }
  if (external_df) return corpus_cider(items, config, external_df);
  const DfTable df = build_df_table(sets, config.max_order);
  return corpus_cider(items, config, &df);
}

std::string RunManifest::to_json() const {
  ojson doc;
  doc["config"] = json::parse(config_json);
  doc["corpus_digest"] = corpus_digest;
  doc["counts"] = {{"split_size", split_size}, {"generated", generated}, {"cached", cached},
                   {"failed", failed},         {"scored", scored}};
  doc["wall_seconds"] = wall_seconds;
  doc["report_path"] = report_path.string();
  ojson f = ojson::array();
  for (const auto& failure : failures) f.push_back({{"image_id", failure.image_id}, {"reason", failure.reason}});
  doc["failures"] = std::move(f);
  doc["truncated"] = truncated;
  return doc.dump(2) + "\n";
}

ReportSummary summarize(const CiderReport& report, const std::string& model_label,
                        const std::string& corpus_digest) {
  ReportSummary s;
  s.model_label = model_label;
  s.corpus_mean = report.corpus_mean;
  s.n_items = report.per_item.size();
  s.per_order_means = report.per_order_means;
  s.config = report.config;
  s.tokenizer = std::string(kTokenizerId);
  s.df_provenance = report.df_provenance;
  s.corpus_digest = corpus_digest;
  return s;
}

namespace {

std::string provenance_footer(const ReportSummary& s) {
  std::string weights = "uniform";
  if (!s.config.uniform()) {
    weights.clear();
    for (double w : s.config.weights) weights += (weights.empty() ? "" : ",") + shortest(w);
  }
  std::string out;
  out += "# sigma=" + shortest(s.config.sigma) + " max_n=" + std::to_string(s.config.max_order) +
         " weights=" + weights + " log=natural variant=cider\n";
  out += "# tokenizer=" + s.tokenizer + "\n";
  out += "# df=" + s.df_provenance + "\n";
  out += "# corpus=" + s.corpus_digest + "\n";
  return out;
}

}  // namespace

std::string render_table(std::vector<ReportSummary> rows) {
  std::stable_sort(rows.begin(), rows.end(), [](const ReportSummary& a, const ReportSummary& b) {
    if (a.corpus_mean != b.corpus_mean) return a.corpus_mean > b.corpus_mean;
    return a.model_label < b.model_label;
  });
  std::size_t width = 0;
  for (const auto& r : rows) width = std::max(width, r.model_label.size());
  auto pad = [&](const std::string& s) { return s + std::string(width - std::min(width, s.size()), ' '); };
  std::string out = pad("Model") + "  CIDEr\n";
  for (const auto& r : rows) out += pad(r.model_label) + "  " + fixed2(r.corpus_mean) + "\n";
  if (!rows.empty()) out += provenance_footer(rows.front());
  return out;
}

std::string emit_report(const CiderReport& report, const RunManifest& manifest,
                        const std::string& model_label, ReportFormat format) {
  const auto summary = summarize(report, model_label, manifest.corpus_digest);
  if (format == ReportFormat::kTable) {
    std::string out = render_table({summary});
    out += "# items=" + std::to_string(summary.n_items) + " failed=" + std::to_string(manifest.failed) + "\n";
    return out;
  }
  std::string out;
  for (const auto& [id, value] : report.per_item) {
    ojson rec;
    rec["image_id"] = id;
    rec["cider"] = value;
    rec["per_order"] = report.per_item_orders.at(id);
    out += rec.dump() + "\n";
  }
  ojson s;
  s["model_label"] = summary.model_label;
  s["corpus_mean"] = summary.corpus_mean;
  s["n_items"] = summary.n_items;
  s["per_order_means"] = summary.per_order_means;
  s["config"] = cider_config_json(summary.config);
  s["tokenizer"] = summary.tokenizer;
  s["df_provenance"] = summary.df_provenance;
  s["corpus_digest"] = summary.corpus_digest;
  ojson failed = ojson::array();
  for (const auto& f : manifest.failures) failed.push_back(f.image_id);
  s["failed"] = std::move(failed);
  s["empty_candidates"] = report.empty_candidates;
  ojson wrapper;
  wrapper["summary"] = std::move(s);
  out += wrapper.dump() + "\n";
  return out;
}

ParsedReport parse_line_records(std::string_view text) {
  ParsedReport parsed;
  bool have_summary = false;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos < text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    auto line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    try {
      auto obj = json::parse(line);
      if (obj.contains("summary")) {
        const auto& s = obj["summary"];
        auto& out = parsed.summary;
        out.model_label = s.at("model_label").get<std::string>();
        out.corpus_mean = s.at("corpus_mean").get<double>();
        out.n_items = s.at("n_items").get<std::size_t>();
        out.per_order_means = s.at("per_order_means").get<std::vector<double>>();
        out.config = cider_config_from(s.at("config"));
        out.tokenizer = s.at("tokenizer").get<std::string>();
        out.df_provenance = s.at("df_provenance").get<std::string>();
        out.corpus_digest = s.at("corpus_digest").get<std::string>();
        have_summary = true;
      } else {
        parsed.per_item[obj.at("image_id").get<std::string>()] = obj.at("cider").get<double>();
      }
    } catch (const json::exception& ex) {
      throw ConfigError("report line " + std::to_string(line_no) + ": " + ex.what());
    }
  }
  if (!have_summary) throw ConfigError("report has no summary record");
  return parsed;
}

std::string merge_reports(const std::vector<ParsedReport>& reports) {
  if (reports.empty()) throw ConfigError("merge-reports: no reports given");
  const auto& ref = reports.front().summary;
  std::vector<ReportSummary> rows;
  for (const auto& r : reports) {
    const auto& s = r.summary;
    std::vector<std::string> diffs;
    if (!(s.config == ref.config)) diffs.emplace_back("metric configuration");
    if (s.tokenizer != ref.tokenizer) diffs.emplace_back("tokenizer");
    if (s.df_provenance != ref.df_provenance) diffs.emplace_back("DF table");
    if (s.corpus_digest != ref.corpus_digest) diffs.emplace_back("corpus");
    if (!diffs.empty()) {
      std::string msg = "merge-reports: '" + s.model_label + "' is not comparable with '" + ref.model_label +
                        "' (differs in";
      for (const auto& d : diffs) msg += " " + d + (&d == &diffs.back() ? "" : ",");
      throw ConfigError(msg + ")");
    }
    rows.push_back(s);
  }
  return render_table(std::move(rows));
}

EvalResult run_eval(const RunConfig& config, const EvalOptions& options) {
  const auto started = std::chrono::steady_clock::now();
  config.validate();
  const auto corpus = load_corpus(config.corpus.string(), config.corpus_format, ParseMode::kStrict).corpus;
  const auto split_corpus = filter_split(corpus, config.split);
  const auto tmpl = PromptTemplate::resolve(config.template_name);

  std::optional<DfTable> external_df;
  if (config.df_table) external_df = DfTable::from_json(read_file(*config.df_table));

  auto backend = options.backend_override
                     ? options.backend_override
                     : make_backend(config.backend, config.corpus.parent_path(), tmpl);
  ClientOptions client_options;
  client_options.cache_dir = config.effective_cache_dir();
  client_options.retry = config.backend.retry;
  client_options.max_in_flight = config.backend.max_in_flight;
  client_options.rate_per_second = config.backend.rate_per_second;
  client_options.burst = config.backend.burst;
  client_options.sleeper = options.sleeper;
  GenerationClient client(backend, client_options);

  auto outcome = run_generation(split_corpus, config, client);

  EvalResult result;
  auto& m = result.manifest;
  m.config_json = config.to_json();
  m.corpus_digest = split_corpus.source_digest();
  m.split_size = split_corpus.size();
  m.generated = outcome.generated;
  m.cached = outcome.cached;
  m.failed = outcome.failures.size();
  m.failures = outcome.failures;
  m.truncated = outcome.truncated;

  std::string generations;
  for (const auto& r : outcome.records) {
    ojson rec;
    rec["image_id"] = r.image_id;
    rec["digest"] = r.digest;
    rec["caption"] = r.caption;
    rec["raw_completion"] = r.raw_completion;
    generations += rec.dump() + "\n";
  }
  write_file_atomic(config.output_dir / "generations.jsonl", generations);

  if (!options.generate_only && !outcome.records.empty()) {
    result.report = run_scoring(outcome.records, split_corpus, config.cider,
                                external_df ? &*external_df : nullptr);
    m.scored = result.report->per_item.size();
    result.table_path = config.output_dir / "report.txt";
    result.records_path = config.output_dir / "scores.jsonl";
    m.report_path = result.table_path;
    write_file_atomic(result.records_path,
                      emit_report(*result.report, m, config.label(), ReportFormat::kLineRecords));
    write_file_atomic(result.table_path, emit_report(*result.report, m, config.label(), ReportFormat::kTable));
  }
  m.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  write_file_atomic(config.output_dir / "manifest.json", m.to_json());
  return result;
}

}  // namespace capgen
