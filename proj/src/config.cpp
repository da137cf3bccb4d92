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

#include "clinbias/config.hpp"

#include <cstdlib>

#include "clinbias/error.hpp"
#include "clinbias/util.hpp"

namespace clinbias::app {

using nlohmann::json;

namespace {

const fs::path kDataDir = CLINBIAS_DATA_DIR;

fs::path resolve(const fs::path& base, const json& j, const char* key, const fs::path& fallback) {
  if (!j.contains(key) || j.at(key).is_null()) return fallback;
  fs::path p = j.at(key).get<std::string>();
  if (p.empty()) return fallback;
  return p.is_absolute() ? p : (base / p).lexically_normal();
}

std::string rel(const fs::path& p, const fs::path& base) {
  if (p.empty()) return "";
  return p.lexically_proximate(base).generic_string();
}

std::optional<std::string> env(const char* name) {
  const char* v = std::getenv(name);
  if (v == nullptr || *v == '\0') return std::nullopt;
  return std::string(v);
}

std::string token_from(const std::string& var) {
  if (var.empty()) return "";
  return env(var.c_str()).value_or("");
}

icd::TableFormat parse_format(const std::string& s) {
  if (s == "auto") return icd::TableFormat::kAuto;
  if (s == "order") return icd::TableFormat::kOrderFile;
  if (s == "tsv") return icd::TableFormat::kTsv;
  throw ValidationError("icd.format must be auto, order or tsv, got '" + s + "'");
}

std::string_view format_name(icd::TableFormat f) {
  switch (f) {
    case icd::TableFormat::kAuto: return "auto";
    case icd::TableFormat::kOrderFile: return "order";
    case icd::TableFormat::kTsv: return "tsv";
  }
  return "auto";
}

}  // namespace

RunConfig parse_config(const json& j, const fs::path& base_dir) {
  RunConfig c;
  c.base_dir = base_dir;
  try {
    const json icd = j.value("icd", json::object());
    c.icd_table = resolve(base_dir, icd, "table", kDataDir / "icd10cm/icd10cm_order_2021.txt");
    c.chapter_blocks =
        resolve(base_dir, icd, "chapter_blocks", kDataDir / "icd10cm/chapter_blocks_2021.json");
    c.icd_format = parse_format(icd.value("format", "auto"));
    c.female_only = resolve(base_dir, icd, "female_only", kDataDir / "icd10cm/female_only.txt");
    c.male_only = resolve(base_dir, icd, "male_only", kDataDir / "icd10cm/male_only.txt");

    const json st = j.value("stimuli", json::object());
    c.names_csv = resolve(base_dir, st, "names_csv", {});
    c.frozen_stimuli = resolve(base_dir, st, "frozen", {});
    c.top_k = st.value("top_k", c.top_k);
    if (st.contains("years")) c.years = st.at("years").get<std::set<int>>();

    c.records = resolve(base_dir, j, "records", {});
    c.lexicon = resolve(base_dir, j, "lexicon", kDataDir / "lexicon/gender_lexicon.tsv");
    c.prompt_template = resolve(base_dir, j, "prompt_template", {});

    const json be = j.value("backend", json::object());
    c.backend.kind = be.value("kind", c.backend.kind);
    c.backend.endpoint = be.value("endpoint", "");
    c.backend.model_id = be.value("model_id", c.backend.model_id);
    c.backend.token_env = be.value("token_env", c.backend.token_env);
    c.backend.timeout_seconds = be.value("timeout_seconds", c.backend.timeout_seconds);
    c.backend.mock = be.value("mock", json::object());

    const json em = j.value("embedder", json::object());
    c.embedder.kind = em.value("kind", c.embedder.kind);
    c.embedder.endpoint = em.value("endpoint", "");
    c.embedder.model_id = em.value("model_id", "");
    c.embedder.token_env = em.value("token_env", c.embedder.token_env);
    c.embedder.timeout_seconds = em.value("timeout_seconds", c.embedder.timeout_seconds);
    c.embedder.batch_size = em.value("batch_size", c.embedder.batch_size);

    c.output_dir = resolve(base_dir, j, "output_dir", base_dir / "out");
    c.cache_dir = resolve(base_dir, j, "cache_dir", c.output_dir / "cache");

    const json in = j.value("intrinsic", json::object());
    if (in.contains("sample") && !in.at("sample").is_null()) {
      c.sample_codes = in.at("sample").get<std::size_t>();
    }
    c.sample_seed = in.value("seed", c.sample_seed);
    c.include_sex_specific = in.value("include_sex_specific", c.include_sex_specific);
    c.first_token_only = in.value("first_token_only", c.first_token_only);

    const json ex = j.value("extrinsic", json::object());
    if (ex.contains("axes")) {
      c.axes.clear();
      for (const auto& a : ex.at("axes")) c.axes.insert(parse_axis(a.get<std::string>()));
    }
    const json dec = ex.value("decoding", json::object());
    c.decoding.temperature = dec.value("temperature", c.decoding.temperature);
    c.decoding.max_tokens = dec.value("max_tokens", c.decoding.max_tokens);
    c.decoding.seed = dec.value("seed", c.decoding.seed);
    c.low_similarity = ex.value("low_similarity", c.low_similarity);

    c.concurrency = j.value("concurrency", c.concurrency);
    c.retry_attempts = j.value("retry_attempts", c.retry_attempts);
    c.retry_backoff_ms = j.value("retry_backoff_ms", c.retry_backoff_ms);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }

  if (c.backend.kind != "mock" && c.backend.kind != "http" && c.backend.kind != "openai") {
    throw ValidationError("config: backend.kind must be mock, http or openai");
  }
  if (c.backend.kind != "mock" && c.backend.endpoint.empty()) {
    throw ValidationError("config: backend.endpoint is required for kind " + c.backend.kind);
  }
  if (c.concurrency == 0) throw ValidationError("config: concurrency must be positive");
  if (c.top_k == 0) throw ValidationError("config: stimuli.top_k must be positive");
  if (c.decoding.max_tokens <= 0) throw ValidationError("config: decoding.max_tokens must be positive");
  return c;
}

RunConfig load_config(const fs::path& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
  return parse_config(j, fs::absolute(path).parent_path());
}

void apply_env_overrides(RunConfig& c) {
  if (auto v = env("CLINBIAS_BACKEND_ENDPOINT")) c.backend.endpoint = *v;
  if (auto v = env("CLINBIAS_EMBEDDER_ENDPOINT")) c.embedder.endpoint = *v;
  if (auto v = env("CLINBIAS_OUTPUT_DIR")) c.output_dir = *v;
  if (auto v = env("CLINBIAS_CACHE_DIR")) c.cache_dir = *v;
  if (auto v = env("CLINBIAS_MOCK_FAIL_AFTER")) {
    try {
      c.mock_fail_after = std::stoull(*v);
    } catch (const std::exception&) {
      throw ValidationError("CLINBIAS_MOCK_FAIL_AFTER must be a non-negative integer");
    }
  }
}

json RunConfig::to_json() const {
  json axes_j = json::array();
  for (Axis a : axes) axes_j.push_back(clinbias::to_string(a));
  json cfg = {
      {"icd",
       {{"table", rel(icd_table, base_dir)},
        {"chapter_blocks", rel(chapter_blocks, base_dir)},
        {"format", format_name(icd_format)},
        {"female_only", rel(female_only, base_dir)},
        {"male_only", rel(male_only, base_dir)}}},
      {"stimuli",
       {{"names_csv", rel(names_csv, base_dir)},
        {"frozen", rel(frozen_stimuli, base_dir)},
        {"top_k", top_k},
        {"years", years}}},
      {"records", rel(records, base_dir)},
      {"lexicon", rel(lexicon, base_dir)},
      {"prompt_template", rel(prompt_template, base_dir)},
      {"backend",
       {{"kind", backend.kind},
        {"endpoint", backend.endpoint},
        {"model_id", backend.model_id},
        {"mock", backend.mock}}},
      {"embedder",
       {{"kind", embedder.kind}, {"endpoint", embedder.endpoint}, {"model_id", embedder.model_id}}},
      {"intrinsic",
       {{"sample", sample_codes ? json(*sample_codes) : json(nullptr)},
        {"seed", sample_seed},
        {"include_sex_specific", include_sex_specific},
        {"first_token_only", first_token_only}}},
      {"extrinsic",
       {{"axes", axes_j},
        {"decoding", probe::to_json(decoding)},
        {"low_similarity", low_similarity}}},
  };
  return cfg;
}

std::string RunConfig::hash() const { return sha256_hex(to_json().dump()); }

std::unique_ptr<probe::Backend> make_backend(const RunConfig& c) {
  if (c.backend.kind == "mock") {
    probe::MockConfig mc = probe::mock_config_from_json(c.backend.mock);
    if (c.backend.mock.value("name", "").empty()) mc.name = c.backend.model_id;
    if (c.mock_fail_after) mc.fail_after_calls = c.mock_fail_after;
    return std::make_unique<probe::MockBackend>(std::move(mc));
  }
  probe::HttpBackendConfig hc{c.backend.endpoint, c.backend.model_id, token_from(c.backend.token_env),
                              std::chrono::seconds(c.backend.timeout_seconds)};
  if (c.backend.kind == "http") return std::make_unique<probe::HttpBackend>(std::move(hc));
  return std::make_unique<probe::OpenAiCompletionsBackend>(std::move(hc));
}

std::unique_ptr<embed::Embedder> make_embedder(const RunConfig& c) {
  const auto& e = c.embedder;
  if (e.kind == "toy-trigram") return std::make_unique<embed::TrigramEmbedder>();
  if (e.kind == "toy-charbag") return std::make_unique<embed::CharBagEmbedder>();
  if (e.endpoint.empty()) throw ValidationError("config: embedder.endpoint is required for kind " + e.kind);
  probe::HttpBackendConfig hc{e.endpoint, e.model_id, token_from(e.token_env),
                              std::chrono::seconds(e.timeout_seconds)};
  if (e.kind == "http") return std::make_unique<embed::HttpEmbedder>(std::move(hc));
  if (e.kind == "openai") return std::make_unique<embed::OpenAiEmbedder>(std::move(hc));
  throw ValidationError("config: unknown embedder.kind '" + e.kind + "'");
}

}  // namespace clinbias::app
