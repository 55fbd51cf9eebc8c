#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "capgen/error.hpp"
#include "capgen/promptgen.hpp"

namespace capgen {

enum class BackendKind { kCompletionHttp, kEcho, kFixedMap };

std::string_view to_string(BackendKind kind);
std::optional<BackendKind> parse_backend_kind(std::string_view name);

struct GenerationRequest {
  BackendKind backend = BackendKind::kEcho;
  std::string model_id;
  std::string prompt;
  int max_tokens = 64;
  double temperature = 0.0;
  std::vector<std::string> stop = {"\n"};

  /// Throws ConfigError when max_tokens < 1 or temperature < 0.
  void validate() const;
};

/// Fixed-field-order serialization hashed by cache_key(). Doubles use the
/// shortest round-trip decimal form.
std::string canonical_request(const GenerationRequest& request);

/// SHA-256 hex of canonical_request().
std::string cache_key(const GenerationRequest& request);

/// Trims surrounding whitespace, cuts at the first newline, then removes one
/// pair of matching surrounding quotes (" or '). Idempotent.
std::string postprocess_caption(std::string_view raw);

/// Rate limiting, 5xx and connection problems. Retried.
class TransientBackendError : public Error {
 public:
  using Error::Error;
};

/// Anything else a backend cannot answer. Not retried.
class PermanentBackendError : public Error {
 public:
  using Error::Error;
};

/// Retries exhausted or a permanent failure for one item.
class GenerationFailed : public Error {
 public:
  GenerationFailed(std::string image_id, int attempts, const std::string& what)
      : Error(what), image_id_(std::move(image_id)), attempts_(attempts) {}

  const std::string& image_id() const noexcept { return image_id_; }
  int attempts() const noexcept { return attempts_; }

 private:
  std::string image_id_;
  int attempts_;
};

/// A source of raw completions. Implementations signal failures with
/// TransientBackendError, PermanentBackendError or AuthError and must be
/// safe to call from several threads.
class CompletionBackend {
 public:
  virtual ~CompletionBackend() = default;
  virtual std::string complete(const GenerationRequest& request, std::string_view image_id) = 0;
};

/// Offline backend: answers " <description>\n", where the description is
/// recovered from the prompt using the template's literals.
class EchoBackend final : public CompletionBackend {
 public:
  explicit EchoBackend(PromptTemplate tmpl);
  std::string complete(const GenerationRequest& request, std::string_view image_id) override;

 private:
  PromptTemplate template_;
};

/// Offline backend answering from a fixed image_id -> completion table.
/// Unknown ids are a permanent failure.
class FixedMapBackend final : public CompletionBackend {
 public:
  explicit FixedMapBackend(std::map<std::string, std::string> completions);

  /// JSONL with "image_id" and "completion" fields.
  static FixedMapBackend load(const std::string& path);

  std::string complete(const GenerationRequest& request, std::string_view image_id) override;

 private:
  std::map<std::string, std::string> completions_;
};

/// Request and response field mapping for a completion-over-HTTP service.
struct HttpBackendConfig {
  std::string endpoint;  // e.g. https://api.example.com/v1/completions
  std::string prompt_field = "prompt";
  std::string model_field = "model";
  std::string max_tokens_field = "max_tokens";
  std::string temperature_field = "temperature";
  std::string stop_field = "stop";
  std::string response_pointer = "/choices/0/text";  // JSON pointer into the reply
  std::string auth_header = "Authorization";
  std::string auth_prefix = "Bearer ";
  std::string api_key_env = "COMPLETION_API_KEY";
  int timeout_seconds = 60;
};

class HttpBackend final : public CompletionBackend {
 public:
  HttpBackend(HttpBackendConfig config, std::string api_key);

  /// Reads the key from config.api_key_env; throws AuthError when unset.
  static std::unique_ptr<HttpBackend> from_environment(HttpBackendConfig config);

  std::string complete(const GenerationRequest& request, std::string_view image_id) override;

 private:
  HttpBackendConfig config_;
  std::string api_key_;
  std::string scheme_host_port_;
  std::string path_;
};

struct RetryPolicy {
  int max_attempts = 4;
  std::chrono::milliseconds initial_backoff{500};
  double multiplier = 2.0;
  std::chrono::milliseconds max_backoff{30'000};

  /// Delay before attempt `attempt + 1`, for attempt >= 1.
  std::chrono::milliseconds backoff_after(int attempt) const;
};

/// Token bucket. A rate of 0 disables limiting.
class RateLimiter {
 public:
  using Sleeper = std::function<void(std::chrono::nanoseconds)>;

  RateLimiter(double per_second, double burst, Sleeper sleeper = {});
  void acquire();

 private:
  double per_second_;
  double burst_;
  double tokens_;
  std::chrono::steady_clock::time_point last_;
  Sleeper sleeper_;
  std::mutex mutex_;
};

struct CachedCompletion {
  std::string raw_completion;
  double latency_ms = 0.0;
};

/// Content-addressed store: <dir>/<digest[0:2]>/<digest>.json, holding the
/// canonical request, the raw response and a timestamp. Writes go to a
/// temporary file that is then renamed into place.
class DiskCache {
 public:
  explicit DiskCache(std::filesystem::path dir);

  const std::filesystem::path& dir() const noexcept { return dir_; }
  std::filesystem::path path_for(const std::string& digest) const;

  /// Unreadable or mismatching entries are treated as misses.
  std::optional<CachedCompletion> lookup(const std::string& digest) const;
  void store(const std::string& digest, const GenerationRequest& request,
             const CachedCompletion& completion) const;

 private:
  std::filesystem::path dir_;
};

struct GenerationRecord {
  std::string image_id;
  std::string digest;
  std::string raw_completion;
  std::string caption;
  std::chrono::duration<double, std::milli> latency{0};
  bool from_cache = false;
  int attempts = 0;  // backend calls made for this record
};

struct ClientOptions {
  std::optional<std::filesystem::path> cache_dir;
  RetryPolicy retry;
  std::size_t max_in_flight = 4;
  double rate_per_second = 0.0;
  double burst = 1.0;
  /// Used for backoff and rate-limit waits; defaults to sleeping the thread.
  std::function<void(std::chrono::nanoseconds)> sleeper;
};

/// Shared, thread-safe front end over one backend: cache first, then a
/// bounded number of concurrent backend calls with retry and rate limiting.
/// Concurrent identical requests share one backend call.
class GenerationClient {
 public:
  GenerationClient(std::shared_ptr<CompletionBackend> backend, ClientOptions options);

  /// Throws GenerationFailed (item-level) or AuthError (run-level).
  GenerationRecord complete(const GenerationRequest& request, std::string_view image_id);

  /// Backend invocations made so far, retries included.
  std::size_t backend_calls() const noexcept { return backend_calls_.load(); }

 private:
  struct Fetched {
    std::string raw;
    double latency_ms = 0.0;
    int attempts = 0;
  };

  Fetched fetch(const GenerationRequest& request, std::string_view image_id);
  void sleep_for(std::chrono::nanoseconds d) const;

  std::shared_ptr<CompletionBackend> backend_;
  ClientOptions options_;
  std::optional<DiskCache> cache_;
  RateLimiter limiter_;
  std::atomic<std::size_t> backend_calls_{0};

  std::mutex slots_mutex_;
  std::condition_variable slots_cv_;
  std::size_t in_flight_ = 0;

  std::mutex pending_mutex_;
  std::map<std::string, std::shared_future<Fetched>> pending_;
};

}  // namespace capgen
