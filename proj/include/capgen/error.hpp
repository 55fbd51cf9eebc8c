#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace capgen {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid configuration, unresolvable asset or bad invocation. Maps to exit status 2.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Remote backend rejected our credentials. Aborts a run (exit status 2).
class AuthError : public Error {
 public:
  using Error::Error;
};

/// Collected per-record failures from ingesting a corpus in strict mode.
class CorpusError : public Error {
 public:
  explicit CorpusError(std::vector<std::string> problems);

  const std::vector<std::string>& problems() const noexcept { return problems_; }

 private:
  std::vector<std::string> problems_;
};

/// A prompt could not be made to fit its budget.
class BudgetError : public Error {
 public:
  BudgetError(std::string image_id, const std::string& what)
      : Error(what), image_id_(std::move(image_id)) {}

  const std::string& image_id() const noexcept { return image_id_; }

 private:
  std::string image_id_;
};

}  // namespace capgen
