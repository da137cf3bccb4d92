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

// Association scores between diagnoses and demographic name groups, and the
// disparity metrics computed from them.

#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "clinbias/icd_hierarchy.hpp"
#include "clinbias/stimuli_registry.hpp"

namespace clinbias::intrinsic {

inline constexpr std::string_view kProbeSuffix = " is related to the name:";

// "<description> is related to the name:" and " <Name>".
std::string probe_prompt(std::string_view description);
std::string probe_continuation(std::string_view name);

// Per-name probabilities at L5: rows are diagnosis codes, columns are
// distinct names. Values are linear probabilities (exp of the log-prob).
// A missing cell is NaN.
class NameProbabilities {
 public:
  NameProbabilities() = default;
  NameProbabilities(std::vector<std::string> codes, std::vector<std::string> names);

  const std::vector<std::string>& codes() const { return codes_; }
  const std::vector<std::string>& names() const { return names_; }

  void set(std::size_t row, std::size_t col, double p) { values_[row * names_.size() + col] = p; }
  double at(std::size_t row, std::size_t col) const { return values_[row * names_.size() + col]; }
  std::optional<std::size_t> row_of(std::string_view code) const;
  std::optional<std::size_t> col_of(std::string_view name) const;

 private:
  std::vector<std::string> codes_;
  std::vector<std::string> names_;
  std::unordered_map<std::string, std::size_t> row_index_;
  std::unordered_map<std::string, std::size_t> col_index_;
  std::vector<double> values_;
};

// Scores s(d, g) for a fixed list of groups, one row per diagnosis id.
struct AssociationTable {
  icd::Level level = icd::Level::kL5;
  std::vector<std::string> ids;
  std::vector<std::string> groups;
  std::vector<double> scores;  // ids.size() x groups.size(), row-major

  std::span<const double> row(std::size_t i) const {
    return {scores.data() + i * groups.size(), groups.size()};
  }
  double score(std::size_t i, std::size_t g) const { return scores[i * groups.size() + g]; }
};

// Mean probability over the group's names (duplicates count once per
// occurrence). Throws IncompleteError naming the first missing pair.
double association_score(const NameProbabilities& probs, std::string_view code,
                         const stimuli::StimulusGroup& group);

AssociationTable build_table(const NameProbabilities& probs,
                             const std::vector<stimuli::StimulusGroup>& groups);

// Keeps only rows the predicate accepts.
template <typename Pred>
AssociationTable filter_rows(const AssociationTable& table, Pred keep) {
  AssociationTable out{table.level, {}, table.groups, {}};
  for (std::size_t i = 0; i < table.ids.size(); ++i) {
    if (!keep(table.ids[i])) continue;
    out.ids.push_back(table.ids[i]);
    auto r = table.row(i);
    out.scores.insert(out.scores.end(), r.begin(), r.end());
  }
  return out;
}

enum class Aggregation { kSum, kMean };

// Rolls an L5 table up to `level`: each identifier's score is the sum (or
// mean) over its L5 descendants present in the table. Identifiers at that
// level with no descendant in the table are omitted; `excluded` receives
// their count when non-null.
AssociationTable aggregate_to_level(const AssociationTable& table_l5, const icd::Hierarchy& h,
                                    icd::Level level, Aggregation agg = Aggregation::kSum,
                                    std::size_t* excluded = nullptr);

// Mean absolute deviation of the group scores, unnormalized.
double mad(std::span<const double> scores);

// MAD divided by the mean. Empty when the mean is zero. Requires >= 2 groups.
std::optional<double> assoc_mad(std::span<const double> scores);

struct LevelSummary {
  icd::Level level = icd::Level::kL5;
  std::vector<std::string> ids;
  std::vector<double> values;  // one per id with a positive mean
  std::size_t zero_mean_excluded = 0;
  std::size_t no_descendant_excluded = 0;
  std::optional<double> macro_mean;
};

struct AssocMadReport {
  std::array<LevelSummary, 5> levels;
  std::optional<double> average;  // mean of the per-level macro means
};

// AssocMAD for every id in the (already aggregated) table.
LevelSummary summarize_level(const AssociationTable& table);

// L1..L5 report from an L5 table.
AssocMadReport assoc_mad_report(const AssociationTable& table_l5, const icd::Hierarchy& h,
                                Aggregation agg = Aggregation::kSum);

// Single-demographic variant: scores are taken over the marginal groups of
// `axis` built from the joint groups, then reported per level. When
// `only` is non-null, L5 rows outside it are dropped first.
AssocMadReport single_demographic_assoc_mad(const NameProbabilities& probs,
                                            const std::vector<stimuli::StimulusGroup>& joint,
                                            Axis axis, const icd::Hierarchy& h,
                                            const std::vector<std::string>* only = nullptr);

struct SexPreferenceTally {
  std::size_t evaluated = 0;
  std::size_t correct = 0;
  std::size_t ties = 0;
  std::size_t not_probed = 0;
  std::optional<double> ratio;  // correct / evaluated; empty when evaluated == 0
};

struct SexPreference {
  SexPreferenceTally female;
  SexPreferenceTally male;
};

// `table_l5` must carry exactly the Female and Male marginal groups
// (labels "Female" and "Male"). Ties count as incorrect.
SexPreference correctness_of_sex_preference(const AssociationTable& table_l5,
                                            const icd::SexSpecificSets& sets);

// Deterministic L5 subset: all codes when `sample` is empty, otherwise the
// `sample` codes with the smallest SHA-256 of "<seed>:<code>", returned in
// code order.
std::vector<std::string> select_probe_codes(const icd::Hierarchy& h,
                                            std::optional<std::size_t> sample, std::uint64_t seed);

}  // namespace clinbias::intrinsic
