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


// Command-line front end. Exit codes: 0 success, 2 invalid input or
// configuration, 3 backend transport or capability failure, 4 incomplete
// run (rerun to resume from the cache).

#include <cstdio>
#include <exception>
#include <filesystem>
#include <functional>
#include <string>

#include <CLI11.hpp>

#include "clinbias/config.hpp"
#include "clinbias/error.hpp"
#include "clinbias/pipeline.hpp"

namespace {

namespace fs = std::filesystem;
using clinbias::app::RunConfig;

void print_outputs(const fs::path& dir) {
  if (!fs::exists(dir)) return;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().filename() != "results.jsonl" &&
        e.path().filename() != "embeddings.bin") {
      std::printf("  %s\n", e.path().string().c_str());
    }
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Demographic bias evaluation for clinical language models"};
  app.require_subcommand(1);

  std::string config_path;
  std::string output_dir;
  std::size_t concurrency = 0;
  app.add_option("-c,--config", config_path, "Run configuration (JSON)")
      ->required()
      ->check(CLI::ExistingFile);
  app.add_option("-o,--output-dir", output_dir, "Override the output directory");
  app.add_option("-j,--concurrency", concurrency, "Override the number of concurrent requests");

  auto* ingest = app.add_subcommand("ingest", "Validate inputs and freeze name stimuli");
  auto* stats = app.add_subcommand("stats", "Dataset statistics for the admission records");
  auto* probe = app.add_subcommand("probe-intrinsic", "Probe name likelihoods and score disparity");
  std::size_t sample = 0;
  bool include_sex_specific = false;
  bool first_token_only = false;
  probe->add_option("--sample", sample, "Probe a deterministic subset of L5 codes");
  probe->add_flag("--include-sex-specific", include_sex_specific,
                  "Keep sex-specific codes in the disparity tables");
  probe->add_flag("--first-token-only", first_token_only,
                  "Score only the first token of each name");
  auto* extrinsic = app.add_subcommand("run-extrinsic", "Generate, decode and score counterfactuals");
  auto* score = app.add_subcommand("score", "Rescore stored predictions");
  auto* report = app.add_subcommand("report", "Assemble the report from computed sections");

  CLI11_PARSE(app, argc, argv);

  try {
    RunConfig c = clinbias::app::load_config(config_path);
    clinbias::app::apply_env_overrides(c);
    if (!output_dir.empty()) {
      const bool default_cache = c.cache_dir == c.output_dir / "cache";
      c.output_dir = fs::absolute(output_dir);
      if (default_cache) c.cache_dir = c.output_dir / "cache";
    }
    if (concurrency > 0) c.concurrency = concurrency;
    if (probe->count("--sample") > 0) c.sample_codes = sample;
    if (include_sex_specific) c.include_sex_specific = true;
    if (first_token_only) c.first_token_only = true;

    auto counts = [](const clinbias::app::CallCounts& n) {
      std::printf("backend calls: %zu, cache hits: %zu\n", n.backend_calls, n.cache_hits);
    };
    if (ingest->parsed()) {
      clinbias::app::cmd_ingest(c);
      print_outputs(c.output_dir / "ingest");
      print_outputs(c.output_dir / "stats");
    } else if (stats->parsed()) {
      clinbias::app::cmd_stats(c);
      print_outputs(c.output_dir / "stats");
    } else if (probe->parsed()) {
      counts(clinbias::app::cmd_probe_intrinsic(c));
      print_outputs(c.output_dir / "intrinsic");
    } else if (extrinsic->parsed()) {
      counts(clinbias::app::cmd_run_extrinsic(c));
      print_outputs(c.output_dir / "extrinsic");
    } else if (score->parsed()) {
      clinbias::app::cmd_score(c);
      print_outputs(c.output_dir / "extrinsic");
    } else if (report->parsed()) {
      clinbias::app::cmd_report(c);
      for (const char* f : {"report.json", "report.md", "report.csv"}) {
        std::printf("  %s\n", (c.output_dir / f).string().c_str());
      }
    }
    return 0;
  } catch (const clinbias::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return clinbias::exit_code_for(e.kind());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
}
