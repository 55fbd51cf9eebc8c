#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "capgen/genclient.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <thread>

#include "capgen/digest.hpp"
#include "capgen/fileio.hpp"
#include "httplib.h"
#include "json.hpp"

namespace capgen {

using ojson = nlohmann::ordered_json;

std::string_view to_string(BackendKind kind) {
  switch (kind) {
    case BackendKind::kCompletionHttp: return "completion-http";
    case BackendKind::kEcho: return "echo";
    case BackendKind::kFixedMap: return "fixed-map";
  }
  return "?";
}

std::optional<BackendKind> parse_backend_kind(std::string_view name) {
  if (name == "completion-http") return BackendKind::kCompletionHttp;
  if (name == "echo") return BackendKind::kEcho;
  if (name == "fixed-map") return BackendKind::kFixedMap;
  return std::nullopt;
}

void GenerationRequest::validate() const {
  if (max_tokens < 1) throw ConfigError("generation: max_tokens must be >= 1");
  if (!(temperature >= 0.0) || !std::isfinite(temperature)) {
    throw ConfigError("generation: temperature must be >= 0");
  }
}

namespace {

ojson request_object(const GenerationRequest& r) {
  ojson obj;
  obj["backend"] = std::string(to_string(r.backend));
  obj["model_id"] = r.model_id;
  obj["prompt"] = r.prompt;
  obj["max_tokens"] = r.max_tokens;
  obj["temperature"] = r.temperature;
  obj["stop"] = r.stop;
  return obj;
}

}  // namespace

std::string canonical_request(const GenerationRequest& request) {
  return "capgen-request/v1 " + request_object(request).dump();
}

std::string cache_key(const GenerationRequest& request) {
  return sha256_hex(canonical_request(request));
}

namespace {

bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

bool strip_quote_pair(std::string_view& s) {
  static constexpr std::pair<std::string_view, std::string_view> kPairs[] = {
      {"\"", "\""}, {"'", "'"}, {"“", "”"}, {"‘", "’"}};
  for (const auto& [open, close] : kPairs) {
    if (s.size() >= open.size() + close.size() && s.starts_with(open) && s.ends_with(close)) {
      s.remove_prefix(open.size());
      s.remove_suffix(close.size());
      return true;
    }
  }
  return false;
}

}  // namespace

std::string postprocess_caption(std::string_view raw) {
  std::string_view s = trim(raw);
  if (auto nl = s.find('\n'); nl != std::string_view::npos) s = trim(s.substr(0, nl));
  // Nested pairs are peeled too, which keeps the function idempotent.
  while (strip_quote_pair(s)) s = trim(s);
  return std::string(s);
}

// --- offline backends -------------------------------------------------------

EchoBackend::EchoBackend(PromptTemplate tmpl) : template_(std::move(tmpl)) {}

std::string EchoBackend::complete(const GenerationRequest& request, std::string_view) {
  const std::string_view text(template_.text());
  const auto desc_at = text.find(kDescriptionPlaceholder);
  const auto ctx_at = text.find(kContextPlaceholder);
  const auto after_desc = desc_at + kDescriptionPlaceholder.size();
  const std::string_view prefix = text.substr(0, desc_at);
  const std::string_view follow =
      ctx_at > desc_at ? text.substr(after_desc, ctx_at - after_desc) : text.substr(after_desc);

  const std::string_view prompt(request.prompt);
  auto start = prompt.find(prefix);
  if (start == std::string_view::npos) {
    throw PermanentBackendError("echo: prompt does not match template '" + template_.name() + "'");
  }
  start += prefix.size();
  auto end = follow.empty() ? prompt.size() : prompt.find(follow, start);
  if (end == std::string_view::npos) {
    throw PermanentBackendError("echo: prompt does not match template '" + template_.name() + "'");
  }
  return " " + std::string(prompt.substr(start, end - start)) + "\n";
}

FixedMapBackend::FixedMapBackend(std::map<std::string, std::string> completions)
    : completions_(std::move(completions)) {}

FixedMapBackend FixedMapBackend::load(const std::string& path) {
  const std::string bytes = read_file(path);
  std::map<std::string, std::string> table;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < bytes.size()) {
    auto end = bytes.find('\n', pos);
    if (end == std::string::npos) end = bytes.size();
    const std::string_view line = trim(std::string_view(bytes).substr(pos, end - pos));
    pos = end + 1;
    ++line_no;
    if (line.empty()) continue;
    try {
      auto obj = nlohmann::json::parse(line);
      table[obj.at("image_id").get<std::string>()] = obj.at("completion").get<std::string>();
    } catch (const nlohmann::json::exception& ex) {
      throw ConfigError("fixed map '" + path + "' line " + std::to_string(line_no) + ": " + ex.what());
    }
  }
  return FixedMapBackend(std::move(table));
}

std::string FixedMapBackend::complete(const GenerationRequest&, std::string_view image_id) {
  auto it = completions_.find(std::string(image_id));
  if (it == completions_.end()) {
    throw PermanentBackendError("fixed map has no completion for '" + std::string(image_id) + "'");
  }
  return it->second;
}

// --- HTTP backend -----------------------------------------------------------

HttpBackend::HttpBackend(HttpBackendConfig config, std::string api_key)
    : config_(std::move(config)), api_key_(std::move(api_key)) {
  const std::string& url = config_.endpoint;
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos || (!url.starts_with("http://") && !url.starts_with("https://"))) {
    throw ConfigError("completion endpoint must be an http(s) URL, got '" + url + "'");
  }
  const auto path_at = url.find('/', scheme_end + 3);
  scheme_host_port_ = url.substr(0, path_at);
  path_ = path_at == std::string::npos ? "/" : url.substr(path_at);
}

std::unique_ptr<HttpBackend> HttpBackend::from_environment(HttpBackendConfig config) {
  const std::string var = config.api_key_env.empty() ? "COMPLETION_API_KEY" : config.api_key_env;
  const char* key = std::getenv(var.c_str());
  if (key == nullptr || *key == '\0') {
    throw AuthError("no API key: set the " + var + " environment variable");
  }
  return std::make_unique<HttpBackend>(std::move(config), key);
}

std::string HttpBackend::complete(const GenerationRequest& request, std::string_view) {
  ojson body;
  if (!config_.model_field.empty()) body[config_.model_field] = request.model_id;
  if (!config_.prompt_field.empty()) body[config_.prompt_field] = request.prompt;
  if (!config_.max_tokens_field.empty()) body[config_.max_tokens_field] = request.max_tokens;
  if (!config_.temperature_field.empty()) body[config_.temperature_field] = request.temperature;
  if (!config_.stop_field.empty()) body[config_.stop_field] = request.stop;

  httplib::Client client(scheme_host_port_);
  client.set_connection_timeout(config_.timeout_seconds, 0);
  client.set_read_timeout(config_.timeout_seconds, 0);
  httplib::Headers headers;
  if (!config_.auth_header.empty()) {
    headers.emplace(config_.auth_header, config_.auth_prefix + api_key_);
  }
  auto res = client.Post(path_, headers, body.dump(), "application/json");
  if (!res) {
    throw TransientBackendError("completion request failed: " + httplib::to_string(res.error()));
  }
  const int status = res->status;
  if (status == 401 || status == 403) {
    throw AuthError("completion service rejected the API key (HTTP " + std::to_string(status) +
                    "); check " + config_.api_key_env);
  }
  if (status == 408 || status == 429 || status >= 500) {
    throw TransientBackendError("completion service returned HTTP " + std::to_string(status));
  }
  if (status != 200) {
    throw PermanentBackendError("completion service returned HTTP " + std::to_string(status) + ": " +
                                res->body.substr(0, 200));
  }
  try {
    auto reply = nlohmann::json::parse(res->body);
    return reply.at(nlohmann::json::json_pointer(config_.response_pointer)).get<std::string>();
  } catch (const nlohmann::json::exception& ex) {
    throw PermanentBackendError(std::string("unexpected completion response: ") + ex.what());
  }
}

// --- retry, rate limiting, cache ---------------------------------------------

std::chrono::milliseconds RetryPolicy::backoff_after(int attempt) const {
  const double factor = std::pow(multiplier, std::max(0, attempt - 1));
  const double ms = std::min(static_cast<double>(initial_backoff.count()) * factor,
                             static_cast<double>(max_backoff.count()));
  return std::chrono::milliseconds(static_cast<long long>(ms));
}

RateLimiter::RateLimiter(double per_second, double burst, Sleeper sleeper)
    : per_second_(per_second),
      burst_(std::max(1.0, burst)),
      tokens_(std::max(1.0, burst)),
      last_(std::chrono::steady_clock::now()),
      sleeper_(std::move(sleeper)) {}

void RateLimiter::acquire() {
  if (per_second_ <= 0.0) return;
  std::chrono::nanoseconds wait{0};
  {
    std::lock_guard lock(mutex_);
    const auto now = std::chrono::steady_clock::now();
    const double elapsed = std::chrono::duration<double>(now - last_).count();
    last_ = now;
    tokens_ = std::min(burst_, tokens_ + elapsed * per_second_);
    // Tokens may go negative: the debt is paid by sleeping outside the lock.
    tokens_ -= 1.0;
    if (tokens_ < 0.0) {
      wait = std::chrono::nanoseconds(static_cast<long long>(-tokens_ / per_second_ * 1e9));
    }
  }
  if (wait.count() > 0) {
    if (sleeper_) sleeper_(wait);
    else std::this_thread::sleep_for(wait);
  }
}

DiskCache::DiskCache(std::filesystem::path dir) : dir_(std::move(dir)) {}

std::filesystem::path DiskCache::path_for(const std::string& digest) const {
  return dir_ / digest.substr(0, 2) / (digest + ".json");
}

std::optional<CachedCompletion> DiskCache::lookup(const std::string& digest) const {
  const auto path = path_for(digest);
  std::error_code ec;
  if (!std::filesystem::is_regular_file(path, ec)) return std::nullopt;
  try {
    auto doc = nlohmann::json::parse(read_file(path));
    if (doc.at("digest").get<std::string>() != digest) return std::nullopt;
    return CachedCompletion{doc.at("raw_completion").get<std::string>(),
                            doc.value("latency_ms", 0.0)};
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

void DiskCache::store(const std::string& digest, const GenerationRequest& request,
                      const CachedCompletion& completion) const {
  ojson doc;
  doc["format"] = "capgen-cache/v1";
  doc["digest"] = digest;
  doc["request"] = request_object(request);
  doc["raw_completion"] = completion.raw_completion;
  doc["latency_ms"] = completion.latency_ms;
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char stamp[32];
  std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", &tm);
  doc["created_at"] = stamp;
  write_file_atomic(path_for(digest), doc.dump(2) + "\n");
}

// --- client -------------------------------------------------------------------

GenerationClient::GenerationClient(std::shared_ptr<CompletionBackend> backend, ClientOptions options)
    : backend_(std::move(backend)),
      options_(std::move(options)),
      limiter_(options_.rate_per_second, options_.burst, options_.sleeper) {
  if (!backend_) throw ConfigError("generation client needs a backend");
  if (options_.max_in_flight == 0) options_.max_in_flight = 1;
  if (options_.retry.max_attempts < 1) options_.retry.max_attempts = 1;
  if (options_.cache_dir) cache_.emplace(*options_.cache_dir);
}

void GenerationClient::sleep_for(std::chrono::nanoseconds d) const {
  if (options_.sleeper) options_.sleeper(d);
  else std::this_thread::sleep_for(d);
}

GenerationClient::Fetched GenerationClient::fetch(const GenerationRequest& request,
                                                  std::string_view image_id) {
  Fetched fetched;
  for (int attempt = 1;; ++attempt) {
    {
      std::unique_lock lock(slots_mutex_);
      slots_cv_.wait(lock, [&] { return in_flight_ < options_.max_in_flight; });
      ++in_flight_;
    }
    struct SlotRelease {
      GenerationClient& self;
      ~SlotRelease() {
        {
          std::lock_guard lock(self.slots_mutex_);
          --self.in_flight_;
        }
        self.slots_cv_.notify_one();
      }
    };
    std::string error;
    bool transient = false;
    {
      SlotRelease release{*this};
      limiter_.acquire();
      ++backend_calls_;
      fetched.attempts = attempt;
      const auto start = std::chrono::steady_clock::now();
      try {
        fetched.raw = backend_->complete(request, image_id);
        fetched.latency_ms =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
        return fetched;
      } catch (const TransientBackendError& ex) {
        transient = true;
        error = ex.what();
      } catch (const PermanentBackendError& ex) {
        error = ex.what();
      }
    }
    if (!transient || attempt >= options_.retry.max_attempts) {
      throw GenerationFailed(std::string(image_id), attempt,
                             "'" + std::string(image_id) + "' failed after " + std::to_string(attempt) +
                                 (attempt == 1 ? " attempt: " : " attempts: ") + error);
    }
    sleep_for(options_.retry.backoff_after(attempt));
  }
}

GenerationRecord GenerationClient::complete(const GenerationRequest& request, std::string_view image_id) {
  request.validate();
  GenerationRecord record;
  record.image_id = std::string(image_id);
  record.digest = cache_key(request);

  if (cache_) {
    if (auto hit = cache_->lookup(record.digest)) {
      record.raw_completion = std::move(hit->raw_completion);
      record.caption = postprocess_caption(record.raw_completion);
      record.from_cache = true;
      return record;
    }
  }

  std::promise<Fetched> promise;
  std::shared_future<Fetched> shared;
  bool owner = false;
  {
    std::lock_guard lock(pending_mutex_);
    auto it = pending_.find(record.digest);
    if (it != pending_.end()) {
      shared = it->second;
    } else {
      shared = promise.get_future().share();
      pending_.emplace(record.digest, shared);
      owner = true;
    }
  }

  if (!owner) {
    // Another thread is already fetching this exact request.
    const Fetched& f = shared.get();
    record.raw_completion = f.raw;
    record.caption = postprocess_caption(record.raw_completion);
    record.from_cache = true;
    return record;
  }

  auto forget = [&] {
    std::lock_guard lock(pending_mutex_);
    pending_.erase(record.digest);
  };
  Fetched fetched;
  try {
    fetched = fetch(request, image_id);
    if (cache_) cache_->store(record.digest, request, {fetched.raw, fetched.latency_ms});
  } catch (...) {
    promise.set_exception(std::current_exception());
    forget();
    throw;
  }
  promise.set_value(fetched);
  forget();

  record.raw_completion = std::move(fetched.raw);
  record.caption = postprocess_caption(record.raw_completion);
  record.latency = std::chrono::duration<double, std::milli>(fetched.latency_ms);
  record.attempts = fetched.attempts;
  return record;
}

}  // namespace capgen
