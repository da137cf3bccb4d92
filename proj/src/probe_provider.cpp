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

#include "clinbias/probe_provider.hpp"

#include <cmath>
#include <ctime>
#include <set>
#include <thread>

#include "clinbias/error.hpp"
#include "clinbias/log.hpp"

namespace clinbias::probe {

using nlohmann::json;

std::string utc_timestamp() {
  std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

ProbeResult continuation_logprob(Backend& backend, const ContinuationQuery& query) {
  if (query.prompt.empty() || query.continuation.empty()) {
    throw PreconditionError("continuation query needs a non-empty prompt and continuation");
  }
  TokenLogprobs tl = backend.score_continuation(query);
  if (tl.logprobs.empty()) {
    throw CapabilityError("backend " + backend.id() + " returned no tokens for continuation '" +
                          query.continuation + "'");
  }
  ProbeResult r;
  r.query = query;
  r.token_count = static_cast<int>(tl.logprobs.size());
  r.first_token_log_probability = tl.logprobs.front();
  for (double lp : tl.logprobs) {
    if (!std::isfinite(lp) || lp > 0.0) {
      throw TransportError("backend " + backend.id() + " returned invalid log-probability " +
                               std::to_string(lp),
                           false);
    }
    r.log_probability += lp;
  }
  r.timestamp = utc_timestamp();
  return r;
}

GenerationResult generate(Backend& backend, const GenerationQuery& query) {
  if (query.prompt.empty()) throw PreconditionError("generation prompt is empty");
  if (query.params.max_tokens <= 0) {
    throw PreconditionError("max_tokens must be positive, got " +
                            std::to_string(query.params.max_tokens));
  }
  GenerationResult r;
  r.query = query;
  r.text = backend.generate_text(query);
  r.timestamp = utc_timestamp();
  return r;
}

json to_json(const DecodingParams& p) {
  return {{"temperature", p.temperature}, {"max_tokens", p.max_tokens}, {"seed", p.seed}};
}

json to_json(const ProbeResult& r) {
  return {{"model", r.query.model_id},
          {"prompt", r.query.prompt},
          {"continuation", r.query.continuation},
          {"log_probability", r.log_probability},
          {"first_token_log_probability", r.first_token_log_probability},
          {"token_count", r.token_count},
          {"timestamp", r.timestamp}};
}

ProbeResult probe_result_from_json(const json& j) {
  ProbeResult r;
  r.query = {j.at("model").get<std::string>(), j.at("prompt").get<std::string>(),
             j.at("continuation").get<std::string>()};
  r.log_probability = j.at("log_probability").get<double>();
  r.first_token_log_probability = j.at("first_token_log_probability").get<double>();
  r.token_count = j.at("token_count").get<int>();
  r.timestamp = j.at("timestamp").get<std::string>();
  return r;
}

json to_json(const GenerationResult& r) {
  return {{"model", r.query.model_id},
          {"prompt", r.query.prompt},
          {"params", to_json(r.query.params)},
          {"text", r.text},
          {"timestamp", r.timestamp}};
}

GenerationResult generation_result_from_json(const json& j) {
  GenerationResult r;
  r.query.model_id = j.at("model").get<std::string>();
  r.query.prompt = j.at("prompt").get<std::string>();
  const json& p = j.at("params");
  r.query.params = {p.at("temperature").get<double>(), p.at("max_tokens").get<int>(),
                    p.at("seed").get<std::int64_t>()};
  r.text = j.at("text").get<std::string>();
  r.timestamp = j.at("timestamp").get<std::string>();
  return r;
}

std::string cache_key(const ContinuationQuery& q) {
  return cache_key(json::array({"logprob", q.model_id, q.prompt, q.continuation}));
}

std::string cache_key(const GenerationQuery& q) {
  return cache_key(json::array({"generate", q.model_id, q.prompt, to_json(q.params)}));
}

// ---------------------------------------------------------------------------
// ProbeService

ProbeService::ProbeService(Backend& backend, ResultCache* cache, RetryPolicy retry)
    : backend_(backend), cache_(cache), retry_(retry) {}

template <typename Fn>
auto ProbeService::with_retry(Fn&& fn) -> decltype(fn()) {
  auto backoff = retry_.initial_backoff;
  for (int attempt = 1;; ++attempt) {
    try {
      backend_calls_.fetch_add(1);
      return fn();
    } catch (const TransportError& e) {
      if (!e.retriable() || attempt >= retry_.max_attempts) throw;
      log_warning(std::string("retrying after transport error: ") + e.what());
      std::this_thread::sleep_for(backoff);
      backoff *= 2;
    }
  }
}

ProbeResult ProbeService::probe(const ContinuationQuery& query) {
  const std::string key = cache_key(query);
  if (cache_ != nullptr) {
    if (auto hit = cache_->lookup(key)) {
      cache_hits_.fetch_add(1);
      return probe_result_from_json(*hit);
    }
  }
  ProbeResult r = with_retry([&] { return continuation_logprob(backend_, query); });
  if (cache_ != nullptr && !cache_->store(key, "logprob", to_json(r))) {
    // Another writer got there first; theirs is the canonical entry.
    return probe_result_from_json(*cache_->lookup(key));
  }
  return r;
}

GenerationResult ProbeService::generate(const GenerationQuery& query) {
  if (query.params.max_tokens <= 0) {
    throw PreconditionError("max_tokens must be positive, got " +
                            std::to_string(query.params.max_tokens));
  }
  const std::string key = cache_key(query);
  if (cache_ != nullptr) {
    if (auto hit = cache_->lookup(key)) {
      cache_hits_.fetch_add(1);
      return generation_result_from_json(*hit);
    }
  }
  GenerationResult r = with_retry([&] { return probe::generate(backend_, query); });
  if (cache_ != nullptr && !cache_->store(key, "generate", to_json(r))) {
    return generation_result_from_json(*cache_->lookup(key));
  }
  return r;
}

// ---------------------------------------------------------------------------
// MockBackend

namespace {

constexpr std::uint64_t kFnvOffset = 1469598103934665603ULL;
constexpr std::uint64_t kFnvPrime = 1099511628211ULL;

std::uint64_t fnv_step(std::uint64_t h, unsigned char c) { return (h ^ c) * kFnvPrime; }

std::uint64_t mix(std::uint64_t x) {
  x ^= x >> 33;
  x *= 0xff51afd7ed558ccdULL;
  x ^= x >> 33;
  x *= 0xc4ceb9fe1a85ec53ULL;
  x ^= x >> 33;
  return x;
}

}  // namespace

namespace {

MockConfig parse_mock_config(const json& j) {
  MockConfig c;
  c.name = j.value("name", c.name);
  c.uniform = j.value("uniform", c.uniform);
  if (j.contains("uniform_probability")) {
    double p = j.at("uniform_probability").get<double>();
    if (!(p > 0.0 && p <= 1.0)) throw ValidationError("mock uniform_probability must be in (0, 1]");
    c.uniform_logprob = std::log(p);
  }
  c.supports_logprobs = j.value("supports_logprobs", c.supports_logprobs);
  if (j.contains("fixtures")) {
    for (const auto& f : j.at("fixtures")) {
      std::vector<double> lps;
      if (f.contains("token_logprobs")) {
        lps = f.at("token_logprobs").get<std::vector<double>>();
      } else {
        lps.push_back(f.at("logprob").get<double>());
      }
      c.fixtures[{f.at("prompt").get<std::string>(), f.at("continuation").get<std::string>()}] = lps;
    }
  }
  if (j.contains("rules")) {
    for (const auto& r : j.at("rules")) {
      MockRule rule;
      if (r.at("match").is_string()) {
        rule.match.push_back(r.at("match").get<std::string>());
      } else {
        rule.match = r.at("match").get<std::vector<std::string>>();
      }
      rule.output = r.at("output").get<std::string>();
      c.rules.push_back(std::move(rule));
    }
  }
  c.default_output = j.value("default_output", c.default_output);
  if (j.contains("fail_after_calls")) c.fail_after_calls = j.at("fail_after_calls").get<std::size_t>();
  return c;
}

}  // namespace

MockConfig mock_config_from_json(const json& j) {
  static const std::set<std::string> kKeys = {
      "name",  "uniform",        "uniform_probability", "supports_logprobs",
      "fixtures", "rules", "default_output", "fail_after_calls"};
  if (!j.is_object()) throw ValidationError("mock config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (!kKeys.contains(key)) throw ValidationError("unknown mock config key '" + key + "'");
  }
  try {
    return parse_mock_config(j);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("mock config: ") + e.what());
  }
}

MockBackend::MockBackend(MockConfig config) : config_(std::move(config)) {}

void MockBackend::count_call() {
  std::size_t n = calls_.fetch_add(1) + 1;
  if (config_.fail_after_calls && n > *config_.fail_after_calls) {
    throw TransportError("mock backend: injected failure after " +
                         std::to_string(*config_.fail_after_calls) + " calls");
  }
}

TokenLogprobs MockBackend::score_continuation(const ContinuationQuery& query) {
  if (!config_.supports_logprobs) {
    throw CapabilityError("backend " + id() + " does not report log-probabilities");
  }
  count_call();
  TokenLogprobs out;
  if (auto it = config_.fixtures.find({query.prompt, query.continuation});
      it != config_.fixtures.end()) {
    out.logprobs = it->second;
    out.tokens.assign(it->second.size(), std::string());
    return out;
  }
  if (config_.uniform) {
    out.tokens.push_back(query.continuation);
    out.logprobs.push_back(config_.uniform_logprob);
    return out;
  }
  std::uint64_t h = kFnvOffset;
  for (unsigned char c : query.prompt) h = fnv_step(h, c);
  for (unsigned char c : query.continuation) {
    const std::uint64_t k = mix(h ^ (static_cast<std::uint64_t>(c) << 56)) % 256 + 1;
    out.tokens.emplace_back(1, static_cast<char>(c));
    out.logprobs.push_back(-static_cast<double>(k) / 64.0);
    h = fnv_step(h, c);
  }
  return out;
}

std::string MockBackend::generate_text(const GenerationQuery& query) {
  count_call();
  for (const MockRule& rule : config_.rules) {
    bool all = true;
    for (const auto& m : rule.match) {
      if (query.prompt.find(m) == std::string::npos) {
        all = false;
        break;
      }
    }
    if (all) return rule.output;
  }
  return config_.default_output;
}

}  // namespace clinbias::probe
