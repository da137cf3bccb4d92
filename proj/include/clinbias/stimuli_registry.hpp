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

// Demographic groups and their first-name stimuli.

#pragma once

#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "clinbias/demographics.hpp"

namespace clinbias::stimuli {

struct DemographicGroup {
  Sex sex = Sex::kAny;
  Ethnicity ethnicity = Ethnicity::kAny;
  Insurance insurance = Insurance::kAny;
  std::string label;

  // Builds a group with the canonical label ("White Female", "Female", ...).
  // Throws ValidationError if every axis is Any.
  static DemographicGroup make(Sex sex, Ethnicity ethnicity,
                               Insurance insurance = Insurance::kAny);

  bool operator==(const DemographicGroup&) const = default;
};

struct StimulusGroup {
  DemographicGroup group;
  std::vector<std::string> names;
};

struct IngestOptions {
  std::size_t top_k = 5;
  // Empty means every year in the file.
  std::set<int> years;
};

// Ingests the NYC "Popular Baby Names" CSV (Year of Birth, Gender, Ethnicity,
// Child's First Name, Count, Rank) into the 8 sex x ethnicity groups, in the
// order Female x {White, Black, Hispanic, Asian}, then Male x the same.
//
// Names are title-cased, counts summed across years, and the top-k names by
// total kept; equal totals are ordered by name. A row repeated for the same
// (year, gender, ethnicity, name) after case folding counts once, with its
// largest count.
std::vector<StimulusGroup> ingest_baby_names(std::string_view csv, const IngestOptions& options);
std::vector<StimulusGroup> ingest_baby_names_file(const std::filesystem::path& path,
                                                  const IngestOptions& options);

// Maps an NYC ethnicity label to a group ("WHITE NON HISPANIC" -> White).
std::optional<Ethnicity> normalize_nyc_ethnicity(std::string_view label);
std::string title_case(std::string_view name);

// Pools the joint groups along one axis: Sex gives Female/Male with every
// ethnicity's names concatenated; Ethnicity gives White/Black/Hispanic/Asian
// with the female then male names. Names shared by two source groups appear
// twice.
std::vector<StimulusGroup> marginal_groups(const std::vector<StimulusGroup>& joint, Axis axis);

// Checks non-empty, duplicate-free names; with `expected_k`, that the 8 joint
// groups are present with exactly k names each.
void validate_groups(const std::vector<StimulusGroup>& groups,
                     std::optional<std::size_t> expected_k = std::nullopt);

// Frozen-stimuli JSON, so runs do not need the source CSV.
std::string to_json(const std::vector<StimulusGroup>& groups);
std::vector<StimulusGroup> from_json(std::string_view text);
std::string content_hash(const std::vector<StimulusGroup>& groups);

}  // namespace clinbias::stimuli
