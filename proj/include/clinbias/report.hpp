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

// Report sections as JSON documents, and their markdown / CSV renderings.
//
// Section schemas:
//   intrinsic: {"model", "codes", "names", "mode", "scope", "overall": Levels,
//               "single": {"Sex": Levels, "Ethnicity": Levels},
//               "sex_preference": {"female": Tally, "male": Tally}}
//   Levels:    {"levels": [{"level","macro_mean","diagnoses",
//               "zero_mean_excluded"}...], "average"}
//   extrinsic: {"model", "records", "sex_specific_records",
//               "origin": {"All","SexNeutral","SexSpecific"},
//               "scores": [{"axis","value","cohort","records","origin_recall",
//               "counterfactual_recall","delta","pct_change"}...]}
// Absent values are JSON null and render as "n/a".

#pragma once

#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "clinbias/extrinsic_eval.hpp"
#include "clinbias/intrinsic_metrics.hpp"

namespace clinbias::report {

nlohmann::json levels_json(const intrinsic::AssocMadReport& r);
nlohmann::json tally_json(const intrinsic::SexPreferenceTally& t);
nlohmann::json score_json(const eval::ExtrinsicScore& s);

// Two decimals; "n/a" for null.
std::string fmt(const nlohmann::json& v);
// Two decimals with an explicit sign ("+0.07", "-3.53", "0.00").
std::string fmt_signed(double v);
// "<delta> (<pct>%)", e.g. "-3.53 (-15.24%)".
std::string fmt_delta_cell(double delta, std::optional<double> pct);

std::string intrinsic_markdown(const nlohmann::json& section);
std::string extrinsic_markdown(const nlohmann::json& section);

// Long-format CSV: section,table,row,column,value. Numbers are written
// with two decimals and sign for deltas, matching the markdown.
std::string intrinsic_csv(const nlohmann::json& section);
std::string extrinsic_csv(const nlohmann::json& section);

// Full report from provenance plus optional sections.
std::string report_markdown(const nlohmann::json& report);
std::string report_csv(const nlohmann::json& report);

}  // namespace clinbias::report
