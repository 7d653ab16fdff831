#pragma once

#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <unordered_map>
#include <vector>

#include "httplib.h"
#include "json.hpp"
#include "sphinx/error.hpp"
#include "sphinx/rng.hpp"

// Pluggable text-completion backend. One synchronous operation,
// complete(request) -> text or a categorized failure; everything above it
// (retries, batching, concurrency) is provider-agnostic. Mock providers ship
// in-tree so the whole pipeline can run without network access:
//
//   mock:echo        parses the JSON triple embedded in the prompt and echoes
//                    it back with every non-empty field wrapped in
//                    «lang»...«/lang» markers
//   mock:fail[:n]    fails the first n calls per request id with a transport
//                    error, then behaves like mock:echo (bare mock:fail
//                    always fails)
//   mock:judge[:a|b|tie]  replies in the preference-judge output format
//
// Anything else is treated as an HTTP chat-completions endpoint; the bearer
// token is read from the environment variable SPHINX_PROVIDER_KEY.

namespace sphinx {

struct ProviderRequest {
  std::string prompt;
  double temperature = 0.0;
  std::size_t max_output = 0;  // 0 = provider default
  std::map<std::string, std::string> metadata;  // request id, language
};

enum class ProviderFailureKind { Transport, Http };

struct CompletionResult {
  bool ok = false;
  std::string text;
  ProviderFailureKind failure_kind = ProviderFailureKind::Transport;
  int http_status = 0;
  std::string error;

  /// Transient failures worth retrying: transport errors, 429, and 5xx.
  bool retryable() const {
    if (ok) return false;
    if (failure_kind == ProviderFailureKind::Transport) return true;
    return http_status == 429 || (http_status >= 500 && http_status < 600);
  }

  static CompletionResult success(std::string text) {
    CompletionResult r;
    r.ok = true;
    r.text = std::move(text);
    return r;
  }
  static CompletionResult transport_failure(std::string message) {
    CompletionResult r;
    r.failure_kind = ProviderFailureKind::Transport;
    r.error = std::move(message);
    return r;
  }
  static CompletionResult http_failure(int status, std::string message) {
    CompletionResult r;
    r.failure_kind = ProviderFailureKind::Http;
    r.http_status = status;
    r.error = std::move(message);
    return r;
  }
};

class CompletionProvider {
 public:
  virtual ~CompletionProvider() = default;
  virtual CompletionResult complete(const ProviderRequest& request) = 0;
  virtual std::string describe() const = 0;
};

namespace detail {

/// Locates the outermost balanced JSON object in `text` (first '{' to its
/// matching '}', honoring string literals and escapes). Tolerates code
/// fences and surrounding prose.
inline std::optional<std::string> extract_balanced_json(std::string_view text) {
  const std::size_t start = text.find('{');
  if (start == std::string_view::npos) return std::nullopt;
  int depth = 0;
  bool in_string = false;
  bool escaped = false;
  for (std::size_t i = start; i < text.size(); ++i) {
    const char c = text[i];
    if (in_string) {
      if (escaped) {
        escaped = false;
      } else if (c == '\\') {
        escaped = true;
      } else if (c == '"') {
        in_string = false;
      }
      continue;
    }
    if (c == '"') {
      in_string = true;
    } else if (c == '{') {
      ++depth;
    } else if (c == '}') {
      if (--depth == 0) return std::string(text.substr(start, i - start + 1));
    }
  }
  return std::nullopt;
}

inline std::string wrap_marked(const std::string& text, const std::string& lang) {
  if (text.empty()) return text;
  return "«" + lang + "»" + text + "«/" + lang + "»";
}

}  // namespace detail

/// Deterministic mock: echoes the prompt's embedded JSON triple with each
/// non-empty field wrapped in «lang» markers. Pure and thread-safe.
class MockEchoProvider final : public CompletionProvider {
 public:
  CompletionResult complete(const ProviderRequest& request) override {
    auto embedded = detail::extract_balanced_json(request.prompt);
    if (!embedded) return CompletionResult::success("no JSON found in prompt");
    nlohmann::json obj = nlohmann::json::parse(*embedded, nullptr, false);
    if (obj.is_discarded() || !obj.is_object()) {
      return CompletionResult::success("unparseable prompt payload");
    }
    std::string lang = "x";
    if (auto it = request.metadata.find("language"); it != request.metadata.end()) {
      lang = it->second;
    }
    nlohmann::ordered_json reply;
    for (const char* key : {"system", "human", "assistant"}) {
      const std::string value = obj.contains(key) && obj[key].is_string()
                                    ? obj[key].get<std::string>()
                                    : std::string();
      reply[key] = detail::wrap_marked(value, lang);
    }
    return CompletionResult::success(reply.dump());
  }

  std::string describe() const override { return "mock:echo"; }
};

/// Fails the first `fail_count` calls per request id with a transport error,
/// then delegates to mock:echo. fail_count == nullopt means always fail.
class MockFailProvider final : public CompletionProvider {
 public:
  explicit MockFailProvider(std::optional<std::size_t> fail_count) : fail_count_(fail_count) {}

  CompletionResult complete(const ProviderRequest& request) override {
    std::string key = "?";
    if (auto it = request.metadata.find("id"); it != request.metadata.end()) key = it->second;
    {
      std::lock_guard<std::mutex> lock(mutex_);
      const std::size_t seen = calls_[key]++;
      if (!fail_count_ || seen < *fail_count_) {
        return CompletionResult::transport_failure("scripted failure " + std::to_string(seen + 1) +
                                                   " for request " + key);
      }
    }
    return echo_.complete(request);
  }

  std::string describe() const override {
    return fail_count_ ? "mock:fail:" + std::to_string(*fail_count_) : "mock:fail";
  }

 private:
  std::optional<std::size_t> fail_count_;
  std::unordered_map<std::string, std::size_t> calls_;
  std::mutex mutex_;
  MockEchoProvider echo_;
};

/// Always replies in the judge output format with a fixed verdict.
class MockJudgeProvider final : public CompletionProvider {
 public:
  explicit MockJudgeProvider(std::string verdict) : verdict_(std::move(verdict)) {}

  CompletionResult complete(const ProviderRequest&) override {
    return CompletionResult::success("Comparison: scripted verdict.\nPreferred: " + verdict_);
  }

  std::string describe() const override { return "mock:judge"; }

 private:
  std::string verdict_;
};

/// Name of the environment variable holding the provider bearer token.
inline constexpr const char* kProviderKeyEnv = "SPHINX_PROVIDER_KEY";

struct HttpProviderConfig {
  std::string endpoint;  // e.g. https://host:port/v1/chat/completions
  std::string model;
  // JSON request template. String values equal to "${prompt}" / "${model}"
  // are replaced with the corresponding text; "${temperature}" becomes a
  // number; "${max_output}" becomes a number or, when max_output is 0, the
  // holding key is dropped.
  std::string request_template =
      R"({"model":"${model}","messages":[{"role":"user","content":"${prompt}"}],)"
      R"("temperature":"${temperature}","max_tokens":"${max_output}"})";
  // Dot path to the completion text in the response JSON.
  std::string response_path = "choices.0.message.content";
  int timeout_seconds = 120;
};

class HttpProvider final : public CompletionProvider {
 public:
  explicit HttpProvider(HttpProviderConfig config) : config_(std::move(config)) {
    const std::size_t scheme = config_.endpoint.find("://");
    const std::size_t slash =
        scheme == std::string::npos ? std::string::npos : config_.endpoint.find('/', scheme + 3);
    if (slash == std::string::npos) {
      base_ = config_.endpoint;
      path_ = "/";
    } else {
      base_ = config_.endpoint.substr(0, slash);
      path_ = config_.endpoint.substr(slash);
    }
    if (const char* key = std::getenv(kProviderKeyEnv)) api_key_ = key;
  }

  CompletionResult complete(const ProviderRequest& request) override {
    nlohmann::json body = nlohmann::json::parse(config_.request_template, nullptr, false);
    if (body.is_discarded()) {
      return CompletionResult::http_failure(0, "invalid provider request template");
    }
    substitute(body, request);

    httplib::Client client(base_);
    client.set_read_timeout(config_.timeout_seconds, 0);
    client.set_connection_timeout(config_.timeout_seconds, 0);
    httplib::Headers headers;
    if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);

    auto res = client.Post(path_, headers, body.dump(), "application/json");
    if (!res) {
      return CompletionResult::transport_failure("cannot reach " + config_.endpoint + ": " +
                                                 httplib::to_string(res.error()));
    }
    if (res->status != 200) {
      return CompletionResult::http_failure(res->status,
                                            "provider returned HTTP " + std::to_string(res->status));
    }
    nlohmann::json reply = nlohmann::json::parse(res->body, nullptr, false);
    if (reply.is_discarded()) {
      return CompletionResult::http_failure(200, "provider returned malformed JSON");
    }
    const nlohmann::json* node = walk_path(reply, config_.response_path);
    if (!node || !node->is_string()) {
      return CompletionResult::http_failure(200, "provider response missing '" +
                                                     config_.response_path + "'");
    }
    return CompletionResult::success(node->get<std::string>());
  }

  std::string describe() const override { return config_.endpoint; }

 private:
  void substitute(nlohmann::json& node, const ProviderRequest& request) const {
    if (node.is_object()) {
      std::vector<std::string> drop;
      for (auto& [key, value] : node.items()) {
        if (value.is_string() && value.get<std::string>() == "${max_output}" &&
            request.max_output == 0) {
          drop.push_back(key);
        } else {
          substitute(value, request);
        }
      }
      for (const auto& key : drop) node.erase(key);
    } else if (node.is_array()) {
      for (auto& value : node) substitute(value, request);
    } else if (node.is_string()) {
      const std::string s = node.get<std::string>();
      if (s == "${prompt}") {
        node = request.prompt;
      } else if (s == "${model}") {
        node = config_.model;
      } else if (s == "${temperature}") {
        node = request.temperature;
      } else if (s == "${max_output}") {
        node = request.max_output;
      }
    }
  }

  static const nlohmann::json* walk_path(const nlohmann::json& root, std::string_view path) {
    const nlohmann::json* node = &root;
    std::size_t pos = 0;
    while (pos <= path.size()) {
      std::size_t dot = path.find('.', pos);
      if (dot == std::string_view::npos) dot = path.size();
      const std::string segment(path.substr(pos, dot - pos));
      if (node->is_array()) {
        char* end = nullptr;
        const long idx = std::strtol(segment.c_str(), &end, 10);
        if (end == segment.c_str() || *end != '\0' || idx < 0 ||
            static_cast<std::size_t>(idx) >= node->size()) {
          return nullptr;
        }
        node = &(*node)[static_cast<std::size_t>(idx)];
      } else if (node->is_object()) {
        auto it = node->find(segment);
        if (it == node->end()) return nullptr;
        node = &*it;
      } else {
        return nullptr;
      }
      if (dot == path.size()) break;
      pos = dot + 1;
    }
    return node;
  }

  HttpProviderConfig config_;
  std::string base_;
  std::string path_;
  std::string api_key_;
};

struct RetryPolicy {
  int max_attempts = 3;
  int base_delay_ms = 500;
  int max_delay_ms = 8000;
};

namespace detail {

inline std::chrono::milliseconds backoff_delay(const RetryPolicy& policy, int attempt,
                                               std::uint64_t jitter_bits) {
  double delay = static_cast<double>(policy.base_delay_ms);
  for (int i = 1; i < attempt; ++i) delay *= 2.0;
  delay = std::min(delay, static_cast<double>(policy.max_delay_ms));
  // Jitter in [0.5, 1.0) of the exponential step.
  const double u = static_cast<double>(jitter_bits >> 11) * 0x1.0p-53;
  return std::chrono::milliseconds(static_cast<long>(delay * (0.5 + 0.5 * u)));
}

}  // namespace detail

struct RetriedCompletion {
  CompletionResult result;
  int attempts = 0;
};

/// Calls the provider up to policy.max_attempts times, sleeping an
/// exponentially growing jittered delay between retryable failures.
/// Non-retryable failures return immediately.
inline RetriedCompletion complete_with_retry(CompletionProvider& provider,
                                             const ProviderRequest& request,
                                             const RetryPolicy& policy) {
  thread_local rng::Xoshiro256ss jitter(
      static_cast<std::uint64_t>(std::hash<std::thread::id>{}(std::this_thread::get_id())));
  RetriedCompletion out;
  for (int attempt = 1; attempt <= policy.max_attempts; ++attempt) {
    out.result = provider.complete(request);
    out.attempts = attempt;
    if (out.result.ok || !out.result.retryable()) return out;
    if (attempt < policy.max_attempts && policy.base_delay_ms > 0) {
      std::this_thread::sleep_for(detail::backoff_delay(policy, attempt, jitter.next()));
    }
  }
  return out;
}

/// Builds a provider from a CLI spec string: one of the mock forms above, or
/// an http(s) endpoint URL.
inline std::unique_ptr<CompletionProvider> make_provider(const std::string& spec,
                                                         const std::string& model = "",
                                                         const std::string& request_template = "",
                                                         const std::string& response_path = "") {
  if (spec == "mock:echo") return std::make_unique<MockEchoProvider>();
  if (spec == "mock:fail") return std::make_unique<MockFailProvider>(std::nullopt);
  if (spec.rfind("mock:fail:", 0) == 0) {
    try {
      return std::make_unique<MockFailProvider>(std::stoull(spec.substr(10)));
    } catch (const std::exception&) {
      throw Error::config("bad mock:fail count in provider spec '" + spec + "'");
    }
  }
  if (spec == "mock:judge" || spec == "mock:judge:a") {
    return std::make_unique<MockJudgeProvider>("Answer (A)");
  }
  if (spec == "mock:judge:b") return std::make_unique<MockJudgeProvider>("Answer (B)");
  if (spec == "mock:judge:tie") return std::make_unique<MockJudgeProvider>("TIE");
  if (spec.rfind("http://", 0) == 0 || spec.rfind("https://", 0) == 0) {
    HttpProviderConfig config;
    config.endpoint = spec;
    config.model = model;
    if (!request_template.empty()) config.request_template = request_template;
    if (!response_path.empty()) config.response_path = response_path;
    return std::make_unique<HttpProvider>(std::move(config));
  }
  throw Error::config("unknown provider spec '" + spec +
                      "' (expected mock:echo, mock:fail[:n], mock:judge[:a|b|tie], or an http(s) URL)");
}

}  // namespace sphinx
