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

// Declarative run configuration. Relative paths resolve against the
// directory holding the config file; secrets come only from the
// environment.

#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <set>
#include <string>

#include <nlohmann/json.hpp>

#include "clinbias/demographics.hpp"
#include "clinbias/embedding.hpp"
#include "clinbias/icd_hierarchy.hpp"
#include "clinbias/probe_provider.hpp"

namespace clinbias::app {

namespace fs = std::filesystem;

struct BackendConfig {
  std::string kind = "mock";  // mock | http | openai
  std::string endpoint;
  std::string model_id = "mock";
  std::string token_env = "CLINBIAS_BACKEND_TOKEN";
  int timeout_seconds = 60;
  nlohmann::json mock = nlohmann::json::object();
};

struct EmbedderConfig {
  std::string kind = "toy-trigram";  // toy-trigram | toy-charbag | http | openai
  std::string endpoint;
  std::string model_id;
  std::string token_env = "CLINBIAS_EMBEDDER_TOKEN";
  int timeout_seconds = 60;
  std::size_t batch_size = 64;
};

struct RunConfig {
  fs::path base_dir;

  fs::path icd_table;
  fs::path chapter_blocks;
  icd::TableFormat icd_format = icd::TableFormat::kAuto;
  fs::path female_only;
  fs::path male_only;

  fs::path names_csv;
  fs::path frozen_stimuli;
  std::size_t top_k = 5;
  std::set<int> years;

  fs::path records;
  fs::path lexicon;
  fs::path prompt_template;  // empty: built-in template

  BackendConfig backend;
  EmbedderConfig embedder;

  fs::path cache_dir;
  fs::path output_dir;

  std::optional<std::size_t> sample_codes;
  std::uint64_t sample_seed = 0;
  bool include_sex_specific = false;
  bool first_token_only = false;

  std::set<Axis> axes = {Axis::kSex, Axis::kEthnicity, Axis::kInsurance};
  probe::DecodingParams decoding{0.0, 512, 0};
  double low_similarity = 0.5;

  std::size_t concurrency = 4;
  int retry_attempts = 3;
  int retry_backoff_ms = 200;

  // Fault injection for the mock backend; not part of the configuration
  // proper and never serialized.
  std::optional<std::size_t> mock_fail_after;

  // Everything that can change a result. Operational settings (output and
  // cache locations, concurrency, retries) and secrets are left out so that
  // the same experiment run elsewhere hashes the same.
  nlohmann::json to_json() const;
  std::string hash() const;
};

// Parses a config document. `base_dir` anchors relative paths.
RunConfig parse_config(const nlohmann::json& j, const fs::path& base_dir);
RunConfig load_config(const fs::path& path);

// Environment overrides: CLINBIAS_BACKEND_ENDPOINT, CLINBIAS_EMBEDDER_ENDPOINT,
// CLINBIAS_OUTPUT_DIR, CLINBIAS_CACHE_DIR and CLINBIAS_MOCK_FAIL_AFTER (fault
// injection for the mock backend).
void apply_env_overrides(RunConfig& config);

std::unique_ptr<probe::Backend> make_backend(const RunConfig& config);
std::unique_ptr<embed::Embedder> make_embedder(const RunConfig& config);

}  // namespace clinbias::app
