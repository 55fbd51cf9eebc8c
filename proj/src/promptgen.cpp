#include "capgen/promptgen.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "capgen/error.hpp"

namespace capgen {

namespace {

// Version 1 of the captioning prompt. Each "\n" is a real newline; the
// spaces around them and the "\n." after the context are intentional.
constexpr std::string_view kDefaultTemplate =
    "Here is a description of an image: {description} \n"
    " Here is the context the image appears in: {context} \n"
    ". An appropriate caption for the image is: ";

std::size_t count_of(std::string_view text, std::string_view needle) {
  std::size_t n = 0;
  for (auto pos = text.find(needle); pos != std::string_view::npos;
       pos = text.find(needle, pos + needle.size())) {
    ++n;
  }
  return n;
}

bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

}  // namespace

PromptTemplate::PromptTemplate(std::string name, std::string text)
    : name_(std::move(name)), text_(std::move(text)) {
  const auto n_desc = count_of(text_, kDescriptionPlaceholder);
  const auto n_ctx = count_of(text_, kContextPlaceholder);
  if (n_desc != 1 || n_ctx != 1) {
    throw ConfigError("template '" + name_ + "' must contain {description} and {context} exactly once (found " +
                      std::to_string(n_desc) + " and " + std::to_string(n_ctx) + ")");
  }
  description_at_ = text_.find(kDescriptionPlaceholder);
  context_at_ = text_.find(kContextPlaceholder);
}

PromptTemplate PromptTemplate::default_template() {
  return PromptTemplate("default", std::string(kDefaultTemplate));
}

PromptTemplate PromptTemplate::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open template file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return PromptTemplate(std::filesystem::path(path).stem().string(), buf.str());
}

PromptTemplate PromptTemplate::resolve(const std::string& name_or_path) {
  if (name_or_path.empty() || name_or_path == "default") return default_template();
  return load(name_or_path);
}

std::string_view PromptTemplate::trailing_literal() const {
  const bool ctx_last = context_at_ > description_at_;
  const std::size_t end = ctx_last ? context_at_ + kContextPlaceholder.size()
                                   : description_at_ + kDescriptionPlaceholder.size();
  return std::string_view(text_).substr(end);
}

std::size_t PromptTemplate::fixed_size() const noexcept {
  return text_.size() - kDescriptionPlaceholder.size() - kContextPlaceholder.size();
}

std::string PromptTemplate::render(std::string_view description, std::string_view context) const {
  const std::string_view text(text_);
  const bool desc_first = description_at_ < context_at_;
  const std::size_t first_at = desc_first ? description_at_ : context_at_;
  const std::size_t first_len = desc_first ? kDescriptionPlaceholder.size() : kContextPlaceholder.size();
  const std::size_t second_at = desc_first ? context_at_ : description_at_;
  const std::size_t second_len = desc_first ? kContextPlaceholder.size() : kDescriptionPlaceholder.size();

  std::string out;
  out.reserve(fixed_size() + description.size() + context.size());
  out += text.substr(0, first_at);
  out += desc_first ? description : context;
  out += text.substr(first_at + first_len, second_at - first_at - first_len);
  out += desc_first ? context : description;
  out += text.substr(second_at + second_len);
  return out;
}

std::string render_prompt(const CorpusEntry& entry, const PromptTemplate& tmpl) {
  return tmpl.render(entry.description, entry.context);
}

BudgetPolicy BudgetPolicy::for_window(std::size_t window_tokens, double chars_per_token,
                                      std::size_t reserve_for_completion) {
  if (reserve_for_completion >= window_tokens) {
    throw ConfigError("budget: completion reserve (" + std::to_string(reserve_for_completion) +
                      " tokens) must be below the context window (" + std::to_string(window_tokens) + ")");
  }
  if (!(chars_per_token > 0.0) || !std::isfinite(chars_per_token)) {
    throw ConfigError("budget: chars_per_token must be positive");
  }
  BudgetPolicy p;
  p.chars_per_token = chars_per_token;
  p.reserve_for_completion = reserve_for_completion;
  p.max_chars = static_cast<std::size_t>(
      std::floor(static_cast<double>(window_tokens - reserve_for_completion) * chars_per_token));
  p.validate();
  return p;
}

void BudgetPolicy::validate() const {
  if (max_chars == 0) throw ConfigError("budget: max_chars must be positive");
  if (!(chars_per_token > 0.0)) throw ConfigError("budget: chars_per_token must be positive");
}

FittedPrompt fit_budget(const CorpusEntry& entry, const PromptTemplate& tmpl,
                        const BudgetPolicy& policy) {
  policy.validate();
  FittedPrompt fitted;
  const std::size_t full = tmpl.fixed_size() + entry.description.size() + entry.context.size();
  if (full <= policy.max_chars) {
    fitted.prompt = render_prompt(entry, tmpl);
    return fitted;
  }
  const std::size_t fixed = tmpl.fixed_size() + entry.description.size();
  if (fixed > policy.max_chars) {
    throw BudgetError(entry.image_id, "prompt for '" + entry.image_id + "' needs " +
                                          std::to_string(fixed) +
                                          " bytes without any context; budget is " +
                                          std::to_string(policy.max_chars));
  }
  const std::string_view context(entry.context);
  std::size_t cut = policy.max_chars - fixed;  // < context.size() here
  if (!is_space(context[cut])) {
    // Back off to the start of the word that straddles the limit.
    while (cut > 0 && !is_space(context[cut - 1])) --cut;
  }
  while (cut > 0 && is_space(context[cut - 1])) --cut;

  fitted.prompt = tmpl.render(entry.description, context.substr(0, cut));
  fitted.truncated = true;
  fitted.context_bytes_dropped = context.size() - cut;
  return fitted;
}

}  // namespace capgen
