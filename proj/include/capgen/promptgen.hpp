#pragma once

#include <cstddef>
#include <string>
#include <string_view>

#include "capgen/corpus.hpp"

namespace capgen {

inline constexpr std::string_view kDescriptionPlaceholder = "{description}";
inline constexpr std::string_view kContextPlaceholder = "{context}";
inline constexpr std::string_view kCaptionLeadIn = "An appropriate caption for the image is: ";

/// Text with exactly one {description} and one {context} placeholder.
class PromptTemplate {
 public:
  /// Throws ConfigError when a placeholder is missing or repeated.
  PromptTemplate(std::string name, std::string text);

  /// The description + context captioning prompt, version 1.
  static PromptTemplate default_template();

  /// Reads a template file; the file stem becomes the name.
  static PromptTemplate load(const std::string& path);

  /// "default" selects default_template(), anything else is a file path.
  static PromptTemplate resolve(const std::string& name_or_path);

  const std::string& name() const noexcept { return name_; }
  const std::string& text() const noexcept { return text_; }

  /// Literal text that follows the last placeholder.
  std::string_view trailing_literal() const;

  /// Rendered size in bytes with empty description and context.
  std::size_t fixed_size() const noexcept;

  std::string render(std::string_view description, std::string_view context) const;

 private:
  std::string name_;
  std::string text_;
  std::size_t description_at_ = 0;
  std::size_t context_at_ = 0;
};

/// Placeholders are substituted verbatim in one pass; placeholder-like text
/// inside the entry is left alone.
std::string render_prompt(const CorpusEntry& entry, const PromptTemplate& tmpl);

/// Character budget for a rendered prompt, measured in UTF-8 bytes.
struct BudgetPolicy {
  std::size_t max_chars = 0;
  double chars_per_token = 4.0;
  std::size_t reserve_for_completion = 64;

  /// max_chars = floor((window - reserve) * chars_per_token). Throws
  /// ConfigError unless reserve < window and the result is positive.
  static BudgetPolicy for_window(std::size_t window_tokens, double chars_per_token = 4.0,
                                 std::size_t reserve_for_completion = 64);

  void validate() const;
};

struct FittedPrompt {
  std::string prompt;
  bool truncated = false;
  std::size_t context_bytes_dropped = 0;
};

/// Renders the prompt, dropping trailing context words until it fits in
/// policy.max_chars. The context is cut on a whitespace boundary and the
/// description is never shortened. Throws BudgetError when even an empty
/// context does not fit.
FittedPrompt fit_budget(const CorpusEntry& entry, const PromptTemplate& tmpl,
                        const BudgetPolicy& policy);

}  // namespace capgen
