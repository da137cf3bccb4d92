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

// Admission records, one-axis demographic interventions and prompt layout.

#pragma once

#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "clinbias/demographics.hpp"
#include "clinbias/icd_hierarchy.hpp"

namespace clinbias::cf {

struct AdmissionRecord {
  std::string record_id;
  Sex sex = Sex::kMale;
  Ethnicity ethnicity = Ethnicity::kWhite;
  Insurance insurance = Insurance::kOther;
  std::string note;
  std::vector<std::string> gold_codes;  // dotless, deduplicated, input order
};

bool is_sex_specific(const AdmissionRecord& r, const icd::SexSpecificSets& sets);

// JSON lines with keys record_id, sex, ethnicity, insurance, note,
// gold_codes. Errors name the 1-based line.
std::vector<AdmissionRecord> parse_records(std::string_view jsonl);
std::vector<AdmissionRecord> load_records(const std::filesystem::path& path);
nlohmann::json to_json(const AdmissionRecord& r);

// Gendered word pairs applied as whole-word, case-preserving swaps. Each
// TSV row is "<male form>\t<female form>"; when a word appears in several
// rows the first row decides its mapping in that direction.
class GenderLexicon {
 public:
  static GenderLexicon from_tsv(std::string_view text);
  static GenderLexicon load(const std::filesystem::path& path);

  // Rewrites `text` as if the subject's sex were `target`.
  std::string rewrite(std::string_view text, Sex target) const;

  std::size_t size() const { return rows_; }
  bool contains(std::string_view word) const;

 private:
  std::unordered_map<std::string, std::string> to_female_;
  std::unordered_map<std::string, std::string> to_male_;
  std::size_t rows_ = 0;
};

enum class Placement { kDemographicsFirst, kDemographicsLast };
inline constexpr Placement kPlacements[] = {Placement::kDemographicsFirst,
                                            Placement::kDemographicsLast};
std::string_view to_string(Placement p);

struct CounterfactualVariant {
  std::string base_record_id;
  std::optional<Axis> changed_axis;  // empty for the factual record
  std::string new_value;
  Placement placement = Placement::kDemographicsFirst;
  AdmissionRecord record;  // demographics and note after the intervention

  // "factual" or e.g. "Sex=Female".
  std::string descriptor() const;
  // "<record_id>|<descriptor>|<first|last>".
  std::string id() const;
};

CounterfactualVariant factual_variant(const AdmissionRecord& record,
                                      Placement placement = Placement::kDemographicsFirst);

// Replaces one demographic field. Sex changes also rewrite the note through
// the lexicon; other axes leave it untouched.
CounterfactualVariant make_counterfactual(const AdmissionRecord& record, Axis axis,
                                          std::string_view value, const GenderLexicon& lexicon,
                                          Placement placement = Placement::kDemographicsFirst);

// A prompt template with {{demographics}} and {{note}} slots. The
// demographics block itself is rendered from `demographics`, which may use
// {{sex}}, {{ethnicity}} and {{insurance}}. Whichever slot occurs first in
// `body` receives the demographics block for kDemographicsFirst and the note
// for kDemographicsLast.
struct PromptTemplate {
  std::string body;
  std::string demographics;

  static PromptTemplate from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
  void validate() const;
};

PromptTemplate default_prompt_template();

std::string render_prompt(const AdmissionRecord& record, const PromptTemplate& tpl,
                          Placement placement);
inline std::string render_prompt(const CounterfactualVariant& v, const PromptTemplate& tpl) {
  return render_prompt(v.record, tpl, v.placement);
}

struct AxisValue {
  Axis axis;
  std::string value;
};

// Interventions in report order: Female; Black, Hispanic, Asian; Medicaid,
// Medicare.
std::vector<AxisValue> default_interventions();

struct PlanOptions {
  std::set<Axis> axes = {Axis::kSex, Axis::kEthnicity, Axis::kInsurance};
};

bool is_baseline(const AdmissionRecord& r);

// For every baseline record: the factual record and each intervention on
// the enabled axes, each in both placements. Non-baseline records are
// skipped with a warning.
std::vector<CounterfactualVariant> variant_plan(const std::vector<AdmissionRecord>& records,
                                                const GenderLexicon& lexicon,
                                                const PlanOptions& options = {});

}  // namespace clinbias::cf
