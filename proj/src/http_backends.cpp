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

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include "clinbias/error.hpp"
#include "clinbias/probe_provider.hpp"

namespace clinbias::probe {
namespace {

using nlohmann::json;

struct SplitUrl {
  std::string origin;  // scheme://host[:port]
  std::string prefix;  // path prefix without trailing slash
};

SplitUrl split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw ValidationError("endpoint must start with http:// or https://, got '" + url + "'");
  }
  const std::string scheme = url.substr(0, scheme_end);
  if (scheme != "http" && scheme != "https") {
    throw ValidationError("unsupported endpoint scheme '" + scheme + "'");
  }
  const auto path_start = url.find('/', scheme_end + 3);
  SplitUrl out;
  out.origin = url.substr(0, path_start);
  if (path_start != std::string::npos) {
    out.prefix = url.substr(path_start);
    while (!out.prefix.empty() && out.prefix.back() == '/') out.prefix.pop_back();
  }
  return out;
}

}  // namespace

json post_json(const HttpBackendConfig& config, const std::string& path, const json& body) {
  const SplitUrl url = split_url(config.endpoint);
  httplib::Client client(url.origin);
  const auto secs = static_cast<time_t>(config.timeout.count());
  client.set_connection_timeout(secs, 0);
  client.set_read_timeout(secs, 0);
  client.set_write_timeout(secs, 0);
  httplib::Headers headers;
  if (!config.api_token.empty()) headers.emplace("Authorization", "Bearer " + config.api_token);

  const std::string target = url.prefix + path;
  auto res = client.Post(target, headers, body.dump(), "application/json");
  if (!res) {
    throw TransportError("POST " + config.endpoint + path + " failed: " +
                         httplib::to_string(res.error()));
  }
  const int status = res->status;
  if (status == 501) {
    throw CapabilityError("endpoint " + config.endpoint + path + " does not implement this operation");
  }
  if (status == 429 || status >= 500) {
    throw TransportError("POST " + config.endpoint + path + " returned HTTP " +
                         std::to_string(status));
  }
  if (status < 200 || status >= 300) {
    throw TransportError("POST " + config.endpoint + path + " returned HTTP " +
                             std::to_string(status) + ": " + res->body.substr(0, 200),
                         false);
  }
  try {
    return json::parse(res->body);
  } catch (const json::parse_error& e) {
    throw TransportError("malformed JSON from " + config.endpoint + path + ": " + e.what(), false);
  }
}

// ---------------------------------------------------------------------------
// Native protocol

HttpBackend::HttpBackend(HttpBackendConfig config) : config_(std::move(config)) {
  split_url(config_.endpoint);
}

std::string HttpBackend::id() const { return "http:" + config_.model_id + "@" + config_.endpoint; }

TokenLogprobs HttpBackend::score_continuation(const ContinuationQuery& query) {
  json reply = post_json(config_, "/logprob",
                         {{"model", query.model_id.empty() ? config_.model_id : query.model_id},
                          {"prompt", query.prompt},
                          {"continuation", query.continuation}});
  TokenLogprobs out;
  try {
    out.tokens = reply.at("tokens").get<std::vector<std::string>>();
    out.logprobs = reply.at("logprobs").get<std::vector<double>>();
  } catch (const json::exception& e) {
    throw TransportError(std::string("logprob reply missing fields: ") + e.what(), false);
  }
  if (out.tokens.size() != out.logprobs.size()) {
    throw TransportError("logprob reply has mismatched tokens/logprobs lengths", false);
  }
  return out;
}

std::string HttpBackend::generate_text(const GenerationQuery& query) {
  json reply = post_json(config_, "/generate",
                         {{"model", query.model_id.empty() ? config_.model_id : query.model_id},
                          {"prompt", query.prompt},
                          {"params", to_json(query.params)}});
  if (!reply.contains("text") || !reply["text"].is_string()) {
    throw TransportError("generate reply missing 'text'", false);
  }
  return reply["text"].get<std::string>();
}

// ---------------------------------------------------------------------------
// OpenAI-compatible completions

OpenAiCompletionsBackend::OpenAiCompletionsBackend(HttpBackendConfig config)
    : config_(std::move(config)) {
  split_url(config_.endpoint);
}

std::string OpenAiCompletionsBackend::id() const {
  return "openai:" + config_.model_id + "@" + config_.endpoint;
}

TokenLogprobs OpenAiCompletionsBackend::score_continuation(const ContinuationQuery& query) {
  const std::string text = query.prompt + query.continuation;
  json reply = post_json(config_, "/completions",
                         {{"model", query.model_id.empty() ? config_.model_id : query.model_id},
                          {"prompt", text},
                          {"echo", true},
                          {"max_tokens", 0},
                          {"logprobs", 1},
                          {"temperature", 0}});
  json lp;
  try {
    lp = reply.at("choices").at(0).at("logprobs");
  } catch (const json::exception&) {
    throw CapabilityError("endpoint " + config_.endpoint + " returned no echo logprobs");
  }
  if (lp.is_null()) throw CapabilityError("endpoint " + config_.endpoint + " returned no logprobs");

  const auto& tokens = lp.at("tokens");
  const auto& token_lps = lp.at("token_logprobs");
  const auto& offsets = lp.at("text_offset");
  const std::size_t boundary = query.prompt.size();
  TokenLogprobs out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const auto start = offsets.at(i).get<std::size_t>();
    const std::string tok = tokens.at(i).get<std::string>();
    if (start < boundary && start + tok.size() > boundary) {
      throw CapabilityError("token '" + tok + "' straddles the prompt/continuation boundary");
    }
    if (start < boundary) continue;
    if (token_lps.at(i).is_null()) {
      throw CapabilityError("endpoint returned a null logprob for a continuation token");
    }
    out.tokens.push_back(tok);
    out.logprobs.push_back(token_lps.at(i).get<double>());
  }
  return out;
}

std::string OpenAiCompletionsBackend::generate_text(const GenerationQuery& query) {
  json body = {{"model", query.model_id.empty() ? config_.model_id : query.model_id},
               {"prompt", query.prompt},
               {"max_tokens", query.params.max_tokens},
               {"temperature", query.params.temperature},
               {"seed", query.params.seed}};
  json reply = post_json(config_, "/completions", body);
  try {
    return reply.at("choices").at(0).at("text").get<std::string>();
  } catch (const json::exception& e) {
    throw TransportError(std::string("completions reply missing text: ") + e.what(), false);
  }
}

}  // namespace clinbias::probe
