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

// End-to-end commands behind the CLI. Every command reads a RunConfig and
// writes under config.output_dir:
//
//   ingest/           stimuli.json, records.jsonl, hierarchy.json
//   stats/            chapters.csv, demographics.csv, summary.csv
//   intrinsic/        association_l5.csv, intrinsic.{json,md,csv}
//   extrinsic/        predictions.jsonl, extrinsic.{json,md,csv}
//   report.{json,md,csv}
//   run_log.json      backend call and cache-hit counts per command
//
// A run that loses some backend calls leaves <section>/checkpoint.json and
// raises IncompleteError; rerunning resumes from the result cache.

#pragma once

#include <cstddef>
#include <string>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "clinbias/config.hpp"
#include "clinbias/counterfactual_engine.hpp"
#include "clinbias/icd_hierarchy.hpp"
#include "clinbias/stimuli_registry.hpp"

namespace clinbias::app {

struct CallCounts {
  std::size_t backend_calls = 0;
  std::size_t cache_hits = 0;
};

struct DatasetStats {
  std::size_t records = 0;
  std::size_t sex_specific_records = 0;
  // (chapter id, title, count) for chapters with at least one record,
  // chapter order; a record counts toward the chapter of its first gold code.
  std::vector<std::tuple<std::string, std::string, std::size_t>> chapters;
  // (field, value, count), fields in Sex, Ethnicity, Insurance order.
  std::vector<std::tuple<std::string, std::string, std::size_t>> demographics;
};

DatasetStats compute_stats(const std::vector<cf::AdmissionRecord>& records,
                           const icd::Hierarchy& h, const icd::SexSpecificSets& sets);
std::string chapters_csv(const DatasetStats& s);
std::string demographics_csv(const DatasetStats& s);
std::string summary_csv(const DatasetStats& s);

// Shared inputs, loaded once per command.
struct Inputs {
  icd::ChapterBlockTable table;
  icd::Hierarchy hierarchy;
  icd::SexSpecificSets sex_sets;
};
Inputs load_inputs(const RunConfig& config);

// Frozen stimuli from config, then from a previous ingest, then from the
// names CSV. Throws ValidationError when none is available.
std::vector<stimuli::StimulusGroup> load_stimuli(const RunConfig& config);

void cmd_ingest(const RunConfig& config);
void cmd_stats(const RunConfig& config);
CallCounts cmd_probe_intrinsic(const RunConfig& config);
CallCounts cmd_run_extrinsic(const RunConfig& config);
void cmd_score(const RunConfig& config);
void cmd_report(const RunConfig& config);

}  // namespace clinbias::app
