#include "capgen/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include "capgen/digest.hpp"
#include "capgen/error.hpp"
#include "capgen/textnorm.hpp"
#include "json.hpp"

namespace capgen {

using json = nlohmann::json;

std::string_view to_string(Split split) {
  switch (split) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    case Split::kTest: return "test";
  }
  return "?";
}

std::optional<Split> parse_split(std::string_view label) {
  if (label == "train") return Split::kTrain;
  if (label == "val") return Split::kVal;
  if (label == "test") return Split::kTest;
  return std::nullopt;
}

std::optional<CorpusFormat> parse_corpus_format(std::string_view name) {
  if (name == "canonical-jsonl") return CorpusFormat::kCanonicalJsonl;
  if (name == "concadia-adapter") return CorpusFormat::kConcadiaAdapter;
  return std::nullopt;
}

Corpus::Corpus(std::vector<CorpusEntry> entries, std::string source_digest)
    : entries_(std::move(entries)), source_digest_(std::move(source_digest)) {
  std::set<std::string_view> seen;
  std::vector<std::string> problems;
  for (const auto& e : entries_) {
    if (!seen.insert(e.image_id).second) problems.push_back("duplicate image_id '" + e.image_id + "'");
  }
  if (!problems.empty()) throw CorpusError(std::move(problems));
}

const CorpusEntry* Corpus::find(std::string_view image_id) const {
  auto it = std::find_if(entries_.begin(), entries_.end(),
                         [&](const CorpusEntry& e) { return e.image_id == image_id; });
  return it == entries_.end() ? nullptr : &*it;
}

namespace {

bool blank(std::string_view s) {
  return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c) != 0; });
}

// Text field that may be a plain string or an object with a "raw" string.
std::optional<std::string> text_field(const json& obj, const char* key, bool allow_raw_object) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return std::nullopt;
  if (it->is_string()) return it->get<std::string>();
  if (it->is_number_integer()) return std::to_string(it->get<long long>());
  if (allow_raw_object && it->is_object()) {
    auto raw = it->find("raw");
    if (raw != it->end() && raw->is_string()) return raw->get<std::string>();
  }
  return std::nullopt;
}

std::optional<Split> adapter_split(std::string_view label) {
  if (auto s = parse_split(label)) return s;
  if (label == "dev" || label == "valid" || label == "validation") return Split::kVal;
  return std::nullopt;
}

struct Collector {
  ParseMode mode;
  std::vector<CorpusEntry> entries;
  std::vector<std::string> problems;
  std::set<std::string> ids;

  void add(const json& obj, const std::string& where, bool adapter) {
    if (!obj.is_object()) {
      problems.push_back(where + ": record is not a JSON object");
      return;
    }
    CorpusEntry e;
    std::vector<std::string> errs;
    auto id = text_field(obj, "image_id", false);
    if (!id && adapter) id = text_field(obj, "filename", false);
    if (!id || blank(*id)) {
      errs.push_back("missing image_id");
    } else {
      e.image_id = *id;
    }
    e.article_id = text_field(obj, "article_id", false).value_or("");
    auto desc = text_field(obj, "description", adapter);
    auto cap = text_field(obj, "caption", adapter);
    auto ctx = text_field(obj, "context", adapter);
    if (!desc || blank(*desc)) errs.push_back("empty description");
    else e.description = *desc;
    if (!cap || blank(*cap)) errs.push_back("empty caption");
    else e.caption = *cap;
    e.context = ctx.value_or("");
    auto split_label = text_field(obj, "split", false);
    if (!split_label) {
      errs.push_back("missing split");
    } else {
      auto split = adapter ? adapter_split(*split_label) : parse_split(*split_label);
      if (!split) errs.push_back("unknown split label '" + *split_label + "'");
      else e.split = *split;
    }
    if (errs.empty() && !ids.insert(e.image_id).second) {
      errs.push_back("duplicate image_id '" + e.image_id + "'");
    }
    if (!errs.empty()) {
      std::string msg = where + ":";
      for (const auto& s : errs) msg += " " + s + ";";
      msg.pop_back();
      problems.push_back(std::move(msg));
      return;
    }
    entries.push_back(std::move(e));
  }

  ParseResult finish(std::string_view bytes) {
    if (mode == ParseMode::kStrict && !problems.empty()) throw CorpusError(std::move(problems));
    ParseResult result{Corpus(std::move(entries), "sha256:" + sha256_hex(bytes)), {}};
    for (auto& p : problems) result.warnings.push_back("skipped " + p);
    if (result.corpus.empty()) result.warnings.emplace_back("corpus is empty");
    return result;
  }
};

void parse_lines(std::string_view bytes, Collector& collector, bool adapter) {
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < bytes.size()) {
    auto end = bytes.find('\n', pos);
    if (end == std::string_view::npos) end = bytes.size();
    std::string_view line = bytes.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (blank(line)) continue;
    const std::string where = "line " + std::to_string(line_no);
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& ex) {
      collector.problems.push_back(where + ": malformed JSON (" + ex.what() + ")");
      continue;
    }
    collector.add(obj, where, adapter);
  }
}

}  // namespace

ParseResult parse_corpus(std::string_view bytes, CorpusFormat format, ParseMode mode) {
  Collector collector{mode, {}, {}, {}};
  if (format == CorpusFormat::kCanonicalJsonl) {
    parse_lines(bytes, collector, false);
    return collector.finish(bytes);
  }
  // Adapter: a whole-document {"images": [...]} or per-line objects.
  auto first = bytes.find_first_not_of(" \t\r\n");
  if (first != std::string_view::npos) {
    json doc = json::parse(bytes, nullptr, false);
    if (!doc.is_discarded() && doc.is_object() && doc.contains("images")) {
      const auto& images = doc["images"];
      if (!images.is_array()) throw CorpusError({"\"images\" is not an array"});
      for (std::size_t i = 0; i < images.size(); ++i) {
        collector.add(images[i], "record " + std::to_string(i + 1), true);
      }
      return collector.finish(bytes);
    }
  }
  parse_lines(bytes, collector, true);
  return collector.finish(bytes);
}

ParseResult parse_corpus(std::istream& source, CorpusFormat format, ParseMode mode) {
  std::ostringstream buf;
  buf << source.rdbuf();
  return parse_corpus(std::string_view(buf.str()), format, mode);
}

ParseResult load_corpus(const std::string& path, CorpusFormat format, ParseMode mode) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open corpus file '" + path + "'");
  return parse_corpus(in, format, mode);
}

std::string serialize_corpus(const Corpus& corpus) {
  std::string out;
  for (const auto& e : corpus.entries()) {
    nlohmann::ordered_json obj;
    obj["image_id"] = e.image_id;
    obj["article_id"] = e.article_id;
    obj["description"] = e.description;
    obj["context"] = e.context;
    obj["caption"] = e.caption;
    obj["split"] = std::string(to_string(e.split));
    out += obj.dump();
    out.push_back('\n');
  }
  return out;
}

Corpus filter_split(const Corpus& corpus, Split split) {
  std::vector<CorpusEntry> kept;
  std::copy_if(corpus.entries().begin(), corpus.entries().end(), std::back_inserter(kept),
               [&](const CorpusEntry& e) { return e.split == split; });
  std::string tag = "#" + std::string(to_string(split));
  std::string digest = corpus.source_digest();
  if (!digest.ends_with(tag)) digest += tag;
  return Corpus(std::move(kept), std::move(digest));
}

std::vector<SplitStats> corpus_stats(const Corpus& corpus) {
  std::vector<SplitStats> rows;
  for (Split split : kAllSplits) {
    SplitStats row;
    row.split = split;
    std::set<std::string_view> articles;
    double caption_tokens = 0;
    double description_tokens = 0;
    for (const auto& e : corpus.entries()) {
      if (e.split != split) continue;
      ++row.n_entries;
      articles.insert(e.article_id);
      caption_tokens += static_cast<double>(tokenize(e.caption).size());
      description_tokens += static_cast<double>(tokenize(e.description).size());
    }
    row.n_articles = articles.size();
    if (row.n_entries > 0) {
      row.mean_caption_tokens = caption_tokens / static_cast<double>(row.n_entries);
      row.mean_description_tokens = description_tokens / static_cast<double>(row.n_entries);
    }
    rows.push_back(row);
  }
  return rows;
}

}  // namespace capgen
