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
#include "clinbias/probe_provider.hpp"

#include <gtest/gtest.h>
#include <httplib.h>

#include <atomic>
#include <cmath>
#include <thread>

#include "clinbias/error.hpp"
#include "clinbias/result_cache.hpp"
#include "test_support.hpp"

namespace clinbias::probe {
namespace {

using clinbias::testing::TempDir;
using nlohmann::json;

TEST(Mock, ByteTokensAreDeterministicAndNegative) {
  MockBackend a({}), b({});
  auto ra = continuation_logprob(a, {"m", "Fever is related to the name:", " Olivia"});
  auto rb = continuation_logprob(b, {"m", "Fever is related to the name:", " Olivia"});
  EXPECT_EQ(ra.token_count, 7);
  EXPECT_DOUBLE_EQ(ra.log_probability, rb.log_probability);
  EXPECT_LT(ra.log_probability, 0.0);
  EXPECT_LE(ra.first_token_log_probability, -1.0 / 64.0);
  EXPECT_GE(ra.first_token_log_probability, -4.0);
  auto other = continuation_logprob(a, {"m", "Cough is related to the name:", " Olivia"});
  EXPECT_NE(other.log_probability, ra.log_probability);
}

TEST(Mock, JointLogprobIsTokenSum) {
  MockConfig cfg;
  cfg.fixtures[{"p", " Ann"}] = {-0.5, -0.25, -0.125};
  MockBackend m(cfg);
  auto r = continuation_logprob(m, {"m", "p", " Ann"});
  EXPECT_DOUBLE_EQ(r.log_probability, -0.875);
  EXPECT_DOUBLE_EQ(r.first_token_log_probability, -0.5);
  EXPECT_EQ(r.token_count, 3);
}

TEST(Mock, UniformModeGivesEqualProbabilities) {
  MockConfig cfg;
  cfg.uniform = true;
  MockBackend m(cfg);
  auto a = continuation_logprob(m, {"m", "x", " Ann"});
  auto b = continuation_logprob(m, {"m", "y", " Bartholomew"});
  EXPECT_DOUBLE_EQ(a.log_probability, b.log_probability);
  EXPECT_NEAR(std::exp(a.log_probability), 0.01, 1e-15);
}

TEST(Mock, GenerationRulesMatchAllSubstrings) {
  auto cfg = mock_config_from_json(json::parse(R"({
    "rules": [{"match": ["fever", "Female"], "output": "A"},
              {"match": "fever", "output": "B"}],
    "default_output": "C"})"));
  MockBackend m(cfg);
  EXPECT_EQ(generate(m, {"m", "Female with fever", {}}).text, "A");
  EXPECT_EQ(generate(m, {"m", "Male with fever", {}}).text, "B");
  EXPECT_EQ(generate(m, {"m", "cough", {}}).text, "C");
}

TEST(Mock, ConfigRejectsUnknownKeys) {
  EXPECT_THROW(mock_config_from_json(json::parse(R"({"unifrom": true})")), ValidationError);
}

TEST(Mock, WithoutLogprobsRaisesCapabilityError) {
  MockConfig cfg;
  cfg.supports_logprobs = false;
  MockBackend m(cfg);
  EXPECT_THROW(continuation_logprob(m, {"m", "p", " Ann"}), CapabilityError);
}

TEST(Probe, RejectsEmptyInputs) {
  MockBackend m({});
  EXPECT_THROW(continuation_logprob(m, {"m", "", " Ann"}), PreconditionError);
  EXPECT_THROW(continuation_logprob(m, {"m", "p", ""}), PreconditionError);
  DecodingParams bad;
  bad.max_tokens = 0;
  EXPECT_THROW(generate(m, {"m", "p", bad}), PreconditionError);
}

TEST(Probe, PositiveLogprobIsRejected) {
  MockConfig cfg;
  cfg.fixtures[{"p", " Ann"}] = {0.5};
  MockBackend m(cfg);
  EXPECT_THROW(continuation_logprob(m, {"m", "p", " Ann"}), TransportError);
}

TEST(ProbeService, CachesAndCountsCalls) {
  TempDir dir;
  MockBackend m({});
  {
    ResultCache cache(dir.path());
    ProbeService s(m, &cache);
    auto r1 = s.probe({"m", "p", " Ann"});
    auto r2 = s.probe({"m", "p", " Ann"});
    EXPECT_EQ(s.backend_calls(), 1u);
    EXPECT_EQ(s.cache_hits(), 1u);
    EXPECT_DOUBLE_EQ(r1.log_probability, r2.log_probability);
    s.generate({"m", "prompt", {}});
  }
  ResultCache cache(dir.path());
  ProbeService s(m, &cache);
  s.probe({"m", "p", " Ann"});
  s.generate({"m", "prompt", {}});
  EXPECT_EQ(s.backend_calls(), 0u);
  EXPECT_EQ(s.cache_hits(), 2u);
  s.generate({"m", "prompt", {0.7, 512, 0}});  // different decoding, new key
  EXPECT_EQ(s.backend_calls(), 1u);
}

TEST(ProbeService, RetriesTransientFailures) {
  class Flaky : public Backend {
   public:
    std::string id() const override { return "flaky"; }
    TokenLogprobs score_continuation(const ContinuationQuery&) override {
      if (++calls < 3) throw TransportError("temporary");
      return {{"x"}, {-1.0}};
    }
    std::string generate_text(const GenerationQuery&) override {
      ++calls;
      throw TransportError("bad request", false);
    }
    std::atomic<int> calls{0};
  } flaky;
  ProbeService s(flaky, nullptr, {3, std::chrono::milliseconds(1)});
  EXPECT_DOUBLE_EQ(s.probe({"m", "p", " x"}).log_probability, -1.0);
  EXPECT_EQ(flaky.calls.load(), 3);
  flaky.calls = 0;
  EXPECT_THROW(s.generate({"m", "p", {}}), TransportError);
  EXPECT_EQ(flaky.calls.load(), 1);  // non-retriable: no second attempt
}

TEST(ProbeService, FailAfterCallsIsRetriableTransportError) {
  MockConfig cfg;
  cfg.fail_after_calls = 1;
  MockBackend m(cfg);
  ProbeService s(m, nullptr, {2, std::chrono::milliseconds(1)});
  s.probe({"m", "p", " a"});
  try {
    s.probe({"m", "p", " b"});
    FAIL();
  } catch (const TransportError& e) {
    EXPECT_TRUE(e.retriable());
  }
}

// Local HTTP server standing in for a model endpoint.
class Server {
 public:
  Server() {
    port_ = svr_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { svr_.listen_after_bind(); });
    svr_.wait_until_ready();
  }
  ~Server() {
    svr_.stop();
    thread_.join();
  }
  httplib::Server& svr() { return svr_; }
  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_); }

 private:
  httplib::Server svr_;
  int port_ = 0;
  std::thread thread_;
};

TEST(HttpBackend, SpeaksTheWireProtocol) {
  Server server;
  std::string seen_auth;
  server.svr().Post("/v1/logprob", [&](const httplib::Request& req, httplib::Response& res) {
    seen_auth = req.get_header_value("Authorization");
    auto body = json::parse(req.body);
    EXPECT_EQ(body.at("continuation"), " Ann");
    res.set_content(json({{"tokens", {" A", "nn"}}, {"logprobs", {-1.0, -0.5}}}).dump(),
                    "application/json");
  });
  server.svr().Post("/v1/generate", [&](const httplib::Request& req, httplib::Response& res) {
    auto body = json::parse(req.body);
    EXPECT_EQ(body.at("params").at("max_tokens"), 512);
    res.set_content(json({{"text", "1. Fever"}}).dump(), "application/json");
  });
  HttpBackend b({server.url() + "/v1", "model-x", "secret", std::chrono::seconds(5)});
  auto r = continuation_logprob(b, {"model-x", "p", " Ann"});
  EXPECT_DOUBLE_EQ(r.log_probability, -1.5);
  EXPECT_EQ(seen_auth, "Bearer secret");
  EXPECT_EQ(generate(b, {"model-x", "p", {}}).text, "1. Fever");
}

TEST(HttpBackend, MapsStatusCodes) {
  Server server;
  server.svr().Post("/logprob", [](const httplib::Request&, httplib::Response& res) {
    res.status = 503;
  });
  server.svr().Post("/generate", [](const httplib::Request&, httplib::Response& res) {
    res.status = 501;
  });
  HttpBackend b({server.url(), "m", "", std::chrono::seconds(5)});
  try {
    b.score_continuation({"m", "p", " x"});
    FAIL();
  } catch (const TransportError& e) {
    EXPECT_TRUE(e.retriable());
  }
  EXPECT_THROW(b.generate_text({"m", "p", {}}), CapabilityError);
}

TEST(HttpBackend, UnreachableEndpointIsRetriable) {
  HttpBackend b({"http://127.0.0.1:1", "m", "", std::chrono::seconds(1)});
  try {
    b.score_continuation({"m", "p", " x"});
    FAIL();
  } catch (const TransportError& e) {
    EXPECT_TRUE(e.retriable());
  }
}

TEST(OpenAiBackend, EchoLogprobsKeepOnlyContinuationTokens) {
  Server server;
  server.svr().Post("/v1/completions", [](const httplib::Request& req, httplib::Response& res) {
    auto body = json::parse(req.body);
    if (body.value("echo", false)) {
      EXPECT_EQ(body.at("max_tokens"), 0);
      const std::string prompt = body.at("prompt");
      json lp = {{"tokens", {"Fever", " is", " Ann"}},
                 {"token_logprobs", {nullptr, -2.0, -0.75}},
                 {"text_offset", {0, 5, 8}}};
      EXPECT_EQ(prompt, "Fever is Ann");
      res.set_content(json({{"choices", {{{"text", prompt}, {"logprobs", lp}}}}}).dump(),
                      "application/json");
    } else {
      res.set_content(json({{"choices", {{{"text", "1. Cough"}}}}}).dump(), "application/json");
    }
  });
  OpenAiCompletionsBackend b({server.url() + "/v1", "m", "", std::chrono::seconds(5)});
  auto r = continuation_logprob(b, {"m", "Fever is", " Ann"});
  EXPECT_EQ(r.token_count, 1);
  EXPECT_DOUBLE_EQ(r.log_probability, -0.75);
  EXPECT_EQ(generate(b, {"m", "x", {}}).text, "1. Cough");
  // A token crossing the boundary cannot be attributed.
  EXPECT_THROW(continuation_logprob(b, {"m", "Fever is A", "nn"}), CapabilityError);
}

TEST(OpenAiBackend, MissingLogprobsIsCapabilityError) {
  Server server;
  server.svr().Post("/completions", [](const httplib::Request&, httplib::Response& res) {
    res.set_content(R"({"choices":[{"text":"x","logprobs":null}]})", "application/json");
  });
  OpenAiCompletionsBackend b({server.url(), "m", "", std::chrono::seconds(5)});
  EXPECT_THROW(continuation_logprob(b, {"m", "p", " x"}), CapabilityError);
}

}  // namespace
}  // namespace clinbias::probe
