#include "capgen/textnorm.hpp"

#include <stdexcept>

namespace capgen {

namespace {

constexpr char32_t kInvalid = 0xFFFFFFFF;

// Decodes one code point at text[i], advancing i. Malformed sequences yield
// kInvalid and consume a single byte.
char32_t decode_utf8(std::string_view text, std::size_t& i) {
  const auto b0 = static_cast<unsigned char>(text[i]);
  if (b0 < 0x80) {
    ++i;
    return b0;
  }
  int len = 0;
  char32_t cp = 0;
  if ((b0 & 0xE0) == 0xC0) {
    len = 2;
    cp = b0 & 0x1F;
  } else if ((b0 & 0xF0) == 0xE0) {
    len = 3;
    cp = b0 & 0x0F;
  } else if ((b0 & 0xF8) == 0xF0) {
    len = 4;
    cp = b0 & 0x07;
  } else {
    ++i;
    return kInvalid;
  }
  if (i + len > text.size()) {
    ++i;
    return kInvalid;
  }
  for (int k = 1; k < len; ++k) {
    const auto b = static_cast<unsigned char>(text[i + k]);
    if ((b & 0xC0) != 0x80) {
      ++i;
      return kInvalid;
    }
    cp = (cp << 6) | (b & 0x3F);
  }
  // Overlong forms, surrogates and out-of-range values.
  if ((len == 2 && cp < 0x80) || (len == 3 && cp < 0x800) || (len == 4 && cp < 0x10000) ||
      (cp >= 0xD800 && cp <= 0xDFFF) || cp > 0x10FFFF) {
    ++i;
    return kInvalid;
  }
  i += len;
  return cp;
}

void append_utf8(std::string& out, char32_t cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

constexpr bool in(char32_t cp, char32_t lo, char32_t hi) { return cp >= lo && cp <= hi; }

// Whitespace, punctuation and symbols, including controls.
bool is_separator(char32_t cp) {
  if (cp < 0x80) {
    const bool alnum = in(cp, 'a', 'z') || in(cp, 'A', 'Z') || in(cp, '0', '9');
    return !alnum;
  }
  if (in(cp, 0x80, 0xBF)) {
    // Latin-1: keep feminine/masculine ordinals, micro sign, superscript
    // digits and vulgar fractions.
    switch (cp) {
      case 0xAA: case 0xB2: case 0xB3: case 0xB5: case 0xB9: case 0xBA:
      case 0xBC: case 0xBD: case 0xBE:
        return false;
      default:
        return true;
    }
  }
  if (cp == 0xD7 || cp == 0xF7) return true;
  switch (cp) {
    case 0x037E: case 0x0387: case 0x0589: case 0x05BE: case 0x05C0: case 0x05C3:
    case 0x05C6: case 0x05F3: case 0x05F4: case 0x060C: case 0x061B: case 0x061F:
    case 0x06D4: case 0x0964: case 0x0965: case 0x1680: case 0xFEFF:
      return true;
    default:
      break;
  }
  return in(cp, 0x055A, 0x055F) || in(cp, 0x066A, 0x066D) ||
         in(cp, 0x2000, 0x206F) ||  // general punctuation and spaces
         in(cp, 0x20A0, 0x20CF) ||  // currency
         in(cp, 0x2190, 0x23FF) ||  // arrows, operators, technical
         in(cp, 0x2500, 0x27BF) ||  // box drawing, shapes, dingbats
         in(cp, 0x27C0, 0x27EF) || in(cp, 0x2980, 0x2BFF) ||
         in(cp, 0x2E00, 0x2E7F) ||  // supplemental punctuation
         (in(cp, 0x3000, 0x303F) && !in(cp, 0x3005, 0x3007)) ||
         in(cp, 0xFE10, 0xFE1F) || in(cp, 0xFE30, 0xFE6F) ||
         in(cp, 0xFF01, 0xFF0F) || in(cp, 0xFF1A, 0xFF20) ||
         in(cp, 0xFF3B, 0xFF40) || in(cp, 0xFF5B, 0xFF65) ||
         in(cp, 0x1F000, 0x1FAFF);  // emoji and pictographs
}

char32_t to_lower(char32_t cp) {
  if (in(cp, 'A', 'Z')) return cp + 0x20;
  if (cp < 0x80) return cp;
  if (in(cp, 0xC0, 0xDE) && cp != 0xD7) return cp + 0x20;
  if (in(cp, 0x0100, 0x017F)) {
    if (cp == 0x0130) return U'i';
    if (cp == 0x0178) return 0xFF;
    const bool odd_upper = in(cp, 0x0139, 0x0148) || in(cp, 0x0179, 0x017E);
    const bool even_upper =
        in(cp, 0x0100, 0x012F) || in(cp, 0x0132, 0x0137) || in(cp, 0x014A, 0x0177);
    if (odd_upper && (cp & 1)) return cp + 1;
    if (even_upper && !(cp & 1)) return cp + 1;
    return cp;
  }
  if (in(cp, 0x0391, 0x03A9) && cp != 0x03A2) return cp + 0x20;
  if (cp == 0x0386) return 0x03AC;
  if (in(cp, 0x0388, 0x038A)) return cp + 0x25;
  if (cp == 0x038C) return 0x03CC;
  if (in(cp, 0x038E, 0x038F)) return cp + 0x3F;
  if (in(cp, 0x0410, 0x042F)) return cp + 0x20;
  if (in(cp, 0x0400, 0x040F)) return cp + 0x50;
  if (cp == 0x04C0) return 0x04CF;
  if ((in(cp, 0x0460, 0x0481) || in(cp, 0x048A, 0x04BF) || in(cp, 0x04D0, 0x04FF)) && !(cp & 1))
    return cp + 1;
  if (in(cp, 0x04C1, 0x04CE) && (cp & 1)) return cp + 1;
  return cp;
}

}  // namespace

TokenSeq tokenize(std::string_view text) {
  TokenSeq tokens;
  std::string current;
  std::size_t i = 0;
  while (i < text.size()) {
    const char32_t cp = decode_utf8(text, i);
    if (cp == kInvalid || is_separator(cp)) {
      if (!current.empty()) tokens.push_back(std::move(current));
      current.clear();
      continue;
    }
    append_utf8(current, to_lower(cp));
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

std::string join_tokens(const TokenSeq& tokens) {
  std::string out;
  for (const auto& t : tokens) {
    if (!out.empty()) out.push_back(' ');
    out += t;
  }
  return out;
}

NGramProfile::NGramProfile(const TokenSeq& tokens, int max_order) {
  if (max_order < 1) throw std::invalid_argument("ngram_profile: max order must be >= 1");
  by_order_.resize(static_cast<std::size_t>(max_order));
  totals_.assign(static_cast<std::size_t>(max_order), 0);
  for (int n = 1; n <= max_order; ++n) {
    const auto un = static_cast<std::size_t>(n);
    if (tokens.size() < un) continue;
    auto& counts = by_order_[un - 1];
    for (std::size_t start = 0; start + un <= tokens.size(); ++start) {
      std::string gram = tokens[start];
      for (std::size_t k = 1; k < un; ++k) {
        gram.push_back(' ');
        gram += tokens[start + k];
      }
      ++counts[gram];
    }
    totals_[un - 1] = tokens.size() - un + 1;
  }
}

const NGramProfile::Counts& NGramProfile::at(int n) const {
  static const Counts kEmpty;
  if (n < 1 || n > max_order()) return kEmpty;
  return by_order_[static_cast<std::size_t>(n - 1)];
}

std::size_t NGramProfile::total(int n) const {
  if (n < 1 || n > max_order()) return 0;
  return totals_[static_cast<std::size_t>(n - 1)];
}

NGramProfile ngram_profile(const TokenSeq& tokens, int max_order) {
  return NGramProfile(tokens, max_order);
}

}  // namespace capgen
