// Copyright 2026 The clinbias Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Language-model backends: teacher-forced continuation log-probabilities and
// free-text generation, behind one interface, plus the cached service the
// pipelines talk to.
//
// Wire formats for the HTTP backends are documented in docs/wire_protocol.md.

#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "clinbias/result_cache.hpp"

namespace clinbias::probe {

struct ContinuationQuery {
  std::string model_id;
  std::string prompt;
  std::string continuation;
};

struct ProbeResult {
  ContinuationQuery query;
  // Natural log of the joint probability of all continuation tokens.
  double log_probability = 0.0;
  // Log-probability of the first continuation token alone.
  double first_token_log_probability = 0.0;
  int token_count = 0;
  std::string timestamp;
};

struct DecodingParams {
  double temperature = 0.0;
  int max_tokens = 512;
  std::int64_t seed = 0;

  bool operator==(const DecodingParams&) const = default;
};

struct GenerationQuery {
  std::string model_id;
  std::string prompt;
  DecodingParams params;
};

struct GenerationResult {
  GenerationQuery query;
  std::string text;
  std::string timestamp;
};

// Per-token conditional log-probabilities of a forced continuation.
struct TokenLogprobs {
  std::vector<std::string> tokens;
  std::vector<double> logprobs;
};

// Thread-safe backend contract. Implementations throw TransportError for
// network trouble and CapabilityError when an operation is unsupported.
class Backend {
 public:
  virtual ~Backend() = default;
  virtual std::string id() const = 0;
  virtual TokenLogprobs score_continuation(const ContinuationQuery& query) = 0;
  virtual std::string generate_text(const GenerationQuery& query) = 0;
};

// Direct (uncached) calls with contract checks. continuation_logprob sums the
// token log-probabilities; the result must be finite, <= 0, with >= 1 token.
ProbeResult continuation_logprob(Backend& backend, const ContinuationQuery& query);
GenerationResult generate(Backend& backend, const GenerationQuery& query);

nlohmann::json to_json(const ProbeResult& r);
ProbeResult probe_result_from_json(const nlohmann::json& j);
nlohmann::json to_json(const GenerationResult& r);
GenerationResult generation_result_from_json(const nlohmann::json& j);
nlohmann::json to_json(const DecodingParams& p);

std::string cache_key(const ContinuationQuery& q);
std::string cache_key(const GenerationQuery& q);

struct RetryPolicy {
  int max_attempts = 3;
  std::chrono::milliseconds initial_backoff{200};
};

// Cache-first access to a backend. Safe for concurrent use.
class ProbeService {
 public:
  // `cache` may be null (no persistence).
  ProbeService(Backend& backend, ResultCache* cache, RetryPolicy retry = {});

  ProbeResult probe(const ContinuationQuery& query);
  GenerationResult generate(const GenerationQuery& query);

  std::size_t backend_calls() const { return backend_calls_.load(); }
  std::size_t cache_hits() const { return cache_hits_.load(); }
  Backend& backend() { return backend_; }

 private:
  template <typename Fn>
  auto with_retry(Fn&& fn) -> decltype(fn());

  Backend& backend_;
  ResultCache* cache_;
  RetryPolicy retry_;
  std::atomic<std::size_t> backend_calls_{0};
  std::atomic<std::size_t> cache_hits_{0};
};

// Deterministic in-process backend for tests and dry runs.
//
// Scoring: every byte of the continuation is one token. Unless a fixture
// overrides the pair, the token's log-probability is -(k/64) with k in
// [1, 256] drawn from an FNV-1a hash of everything before it (prompt plus
// earlier continuation bytes) and the byte itself. These values are dyadic,
// so sums are exact and log p(P, AB) == log p(P, A) + log p(P+A, B) holds
// bit for bit. In uniform mode every continuation is a single token with
// `uniform_logprob`.
//
// Generation: the first rule whose every `match` substring occurs in the
// prompt supplies the text; otherwise `default_output`.
struct MockRule {
  std::vector<std::string> match;
  std::string output;
};

struct MockConfig {
  std::string name = "mock";
  bool uniform = false;
  double uniform_logprob = -4.605170185988091;  // ln 0.01
  bool supports_logprobs = true;
  // (prompt, continuation) -> per-token log-probabilities.
  std::map<std::pair<std::string, std::string>, std::vector<double>> fixtures;
  std::vector<MockRule> rules;
  std::string default_output;
  // When set, calls beyond this many raise a retriable TransportError.
  std::optional<std::size_t> fail_after_calls;
};

MockConfig mock_config_from_json(const nlohmann::json& j);

class MockBackend : public Backend {
 public:
  explicit MockBackend(MockConfig config);

  std::string id() const override { return "mock:" + config_.name; }
  TokenLogprobs score_continuation(const ContinuationQuery& query) override;
  std::string generate_text(const GenerationQuery& query) override;

  std::size_t calls() const { return calls_.load(); }
  const MockConfig& config() const { return config_; }

 private:
  void count_call();

  MockConfig config_;
  std::atomic<std::size_t> calls_{0};
};

struct HttpBackendConfig {
  // Base URL such as "http://127.0.0.1:8080" or "https://host/api".
  std::string endpoint;
  std::string model_id;
  std::string api_token;
  std::chrono::seconds timeout{60};
};

// Native JSON-over-HTTP contract: POST {endpoint}/logprob and
// {endpoint}/generate.
class HttpBackend : public Backend {
 public:
  explicit HttpBackend(HttpBackendConfig config);
  std::string id() const override;
  TokenLogprobs score_continuation(const ContinuationQuery& query) override;
  std::string generate_text(const GenerationQuery& query) override;

 private:
  HttpBackendConfig config_;
};

// OpenAI-compatible /completions. Continuation scoring uses echo=true,
// max_tokens=0, logprobs=1 and keeps the tokens whose text offset lies at or
// after the prompt length; a token straddling the boundary is a
// CapabilityError because the split would be ambiguous.
class OpenAiCompletionsBackend : public Backend {
 public:
  explicit OpenAiCompletionsBackend(HttpBackendConfig config);
  std::string id() const override;
  TokenLogprobs score_continuation(const ContinuationQuery& query) override;
  std::string generate_text(const GenerationQuery& query) override;

 private:
  HttpBackendConfig config_;
};

// POSTs JSON and returns the parsed reply. Connection failures, timeouts, 429
// and 5xx raise retriable TransportError; 501 raises CapabilityError; other
// statuses raise non-retriable TransportError. Exposed for the embedder
// clients.
nlohmann::json post_json(const HttpBackendConfig& config, const std::string& path,
                         const nlohmann::json& body);

// ISO-8601 UTC timestamp, second resolution.
std::string utc_timestamp();

}  // namespace clinbias::probe
