#include "capgen/error.hpp"

namespace capgen {

namespace {

std::string join_problems(const std::vector<std::string>& problems) {
  std::string out = "corpus rejected (" + std::to_string(problems.size()) + " problem";
  out += problems.size() == 1 ? ")" : "s)";
  for (const auto& p : problems) {
    out += "\n  ";
    out += p;
  }
  return out;
}

}  // namespace

CorpusError::CorpusError(std::vector<std::string> problems)
    : Error(join_problems(problems)), problems_(std::move(problems)) {}

}  // namespace capgen
