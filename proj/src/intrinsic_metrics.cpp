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

#include "clinbias/intrinsic_metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "clinbias/error.hpp"
#include "clinbias/kernels.hpp"
#include "clinbias/log.hpp"
#include "clinbias/util.hpp"

namespace clinbias::intrinsic {

std::string probe_prompt(std::string_view description) {
  std::string out(trim(description));
  out += kProbeSuffix;
  return out;
}

std::string probe_continuation(std::string_view name) { return " " + std::string(name); }

NameProbabilities::NameProbabilities(std::vector<std::string> codes, std::vector<std::string> names)
    : codes_(std::move(codes)), names_(std::move(names)) {
  for (std::size_t i = 0; i < codes_.size(); ++i) {
    if (!row_index_.emplace(codes_[i], i).second) {
      throw ValidationError("duplicate diagnosis code " + codes_[i] + " in probability table");
    }
  }
  for (std::size_t j = 0; j < names_.size(); ++j) {
    if (!col_index_.emplace(names_[j], j).second) {
      throw ValidationError("duplicate name " + names_[j] + " in probability table");
    }
  }
  values_.assign(codes_.size() * names_.size(), std::numeric_limits<double>::quiet_NaN());
}

std::optional<std::size_t> NameProbabilities::row_of(std::string_view code) const {
  auto it = row_index_.find(std::string(code));
  if (it == row_index_.end()) return std::nullopt;
  return it->second;
}

std::optional<std::size_t> NameProbabilities::col_of(std::string_view name) const {
  auto it = col_index_.find(std::string(name));
  if (it == col_index_.end()) return std::nullopt;
  return it->second;
}

namespace {

double group_mean(const NameProbabilities& probs, std::size_t row,
                  const stimuli::StimulusGroup& group, std::vector<double>& scratch) {
  if (group.names.empty()) throw ValidationError("group " + group.group.label + " has no names");
  scratch.clear();
  for (const auto& name : group.names) {
    auto col = probs.col_of(name);
    double p = col ? probs.at(row, *col) : std::numeric_limits<double>::quiet_NaN();
    if (std::isnan(p)) {
      throw IncompleteError("no probe result for diagnosis " + probs.codes()[row] + " and name " +
                            name);
    }
    scratch.push_back(p);
  }
  return kernels::sum(scratch) / static_cast<double>(scratch.size());
}

}  // namespace

double association_score(const NameProbabilities& probs, std::string_view code,
                         const stimuli::StimulusGroup& group) {
  auto row = probs.row_of(code);
  if (!row) {
    throw IncompleteError("no probe results for diagnosis " + std::string(code));
  }
  std::vector<double> scratch;
  return group_mean(probs, *row, group, scratch);
}

AssociationTable build_table(const NameProbabilities& probs,
                             const std::vector<stimuli::StimulusGroup>& groups) {
  AssociationTable t;
  t.level = icd::Level::kL5;
  t.ids = probs.codes();
  for (const auto& g : groups) t.groups.push_back(g.group.label);
  t.scores.resize(t.ids.size() * groups.size());
  std::vector<double> scratch;
  for (std::size_t i = 0; i < t.ids.size(); ++i) {
    for (std::size_t g = 0; g < groups.size(); ++g) {
      t.scores[i * groups.size() + g] = group_mean(probs, i, groups[g], scratch);
    }
  }
  return t;
}

AssociationTable aggregate_to_level(const AssociationTable& table_l5, const icd::Hierarchy& h,
                                    icd::Level level, Aggregation agg, std::size_t* excluded) {
  if (table_l5.level != icd::Level::kL5) {
    throw PreconditionError("aggregate_to_level expects an L5 table");
  }
  if (excluded != nullptr) *excluded = 0;
  if (level == icd::Level::kL5) return table_l5;

  const std::size_t ng = table_l5.groups.size();
  // Ordered by identifier for stable output.
  std::map<std::string, std::pair<std::vector<double>, std::size_t>> acc;
  for (std::size_t i = 0; i < table_l5.ids.size(); ++i) {
    const std::string& id = h.ancestor_at(table_l5.ids[i], level);
    auto& [sums, count] = acc[id];
    if (sums.empty()) sums.assign(ng, 0.0);
    auto r = table_l5.row(i);
    for (std::size_t g = 0; g < ng; ++g) sums[g] += r[g];
    ++count;
  }

  AssociationTable out{level, {}, table_l5.groups, {}};
  out.ids.reserve(acc.size());
  out.scores.reserve(acc.size() * ng);
  for (auto& [id, entry] : acc) {
    auto& [sums, count] = entry;
    out.ids.push_back(id);
    for (double s : sums) {
      out.scores.push_back(agg == Aggregation::kSum ? s : s / static_cast<double>(count));
    }
  }
  if (excluded != nullptr) {
    const std::size_t total = h.codes_at_level(level).size();
    *excluded = total > out.ids.size() ? total - out.ids.size() : 0;
  }
  return out;
}

double mad(std::span<const double> scores) {
  if (scores.empty()) throw PreconditionError("mad of an empty score vector");
  const double n = static_cast<double>(scores.size());
  const double mu = kernels::sum(scores) / n;
  return kernels::abs_dev_sum(scores, mu) / n;
}

std::optional<double> assoc_mad(std::span<const double> scores) {
  if (scores.size() < 2) {
    throw PreconditionError("assoc_mad needs at least 2 groups, got " +
                            std::to_string(scores.size()));
  }
  for (double s : scores) {
    if (!(s >= 0.0) || !std::isfinite(s)) {
      throw ValidationError("association scores must be finite and non-negative");
    }
  }
  const double n = static_cast<double>(scores.size());
  const double mu = kernels::sum(scores) / n;
  if (mu == 0.0) return std::nullopt;
  return kernels::abs_dev_sum(scores, mu) / (n * mu);
}

LevelSummary summarize_level(const AssociationTable& table) {
  LevelSummary s;
  s.level = table.level;
  double total = 0.0;
  for (std::size_t i = 0; i < table.ids.size(); ++i) {
    auto v = assoc_mad(table.row(i));
    if (!v) {
      ++s.zero_mean_excluded;
      continue;
    }
    s.ids.push_back(table.ids[i]);
    s.values.push_back(*v);
    total += *v;
  }
  if (!s.values.empty()) s.macro_mean = total / static_cast<double>(s.values.size());
  if (s.zero_mean_excluded > 0) {
    log_warning("level " + std::string(icd::level_name(table.level)) + ": " +
                std::to_string(s.zero_mean_excluded) +
                " diagnoses excluded because every group score is zero");
  }
  return s;
}

AssocMadReport assoc_mad_report(const AssociationTable& table_l5, const icd::Hierarchy& h,
                                Aggregation agg) {
  AssocMadReport report;
  double total = 0.0;
  int counted = 0;
  for (icd::Level level : icd::kAllLevels) {
    std::size_t excluded = 0;
    AssociationTable t = aggregate_to_level(table_l5, h, level, agg, &excluded);
    LevelSummary s = summarize_level(t);
    s.no_descendant_excluded = excluded;
    if (s.macro_mean) {
      total += *s.macro_mean;
      ++counted;
    }
    report.levels[icd::level_index(level)] = std::move(s);
  }
  if (counted > 0) report.average = total / counted;
  return report;
}

AssocMadReport single_demographic_assoc_mad(const NameProbabilities& probs,
                                            const std::vector<stimuli::StimulusGroup>& joint,
                                            Axis axis, const icd::Hierarchy& h,
                                            const std::vector<std::string>* only) {
  const auto marginals = stimuli::marginal_groups(joint, axis);
  AssociationTable t = build_table(probs, marginals);
  if (only != nullptr) {
    const std::set<std::string> keep(only->begin(), only->end());
    t = filter_rows(t, [&](const std::string& id) { return keep.contains(id); });
  }
  return assoc_mad_report(t, h);
}

SexPreference correctness_of_sex_preference(const AssociationTable& table_l5,
                                            const icd::SexSpecificSets& sets) {
  if (table_l5.level != icd::Level::kL5) {
    throw PreconditionError("sex preference is evaluated on L5 scores");
  }
  auto col = [&](std::string_view label) {
    auto it = std::find(table_l5.groups.begin(), table_l5.groups.end(), label);
    if (it == table_l5.groups.end()) {
      throw PreconditionError("table lacks the '" + std::string(label) + "' marginal group");
    }
    return static_cast<std::size_t>(it - table_l5.groups.begin());
  };
  const std::size_t f = col("Female");
  const std::size_t m = col("Male");
  std::unordered_map<std::string, std::size_t> row;
  for (std::size_t i = 0; i < table_l5.ids.size(); ++i) row.emplace(table_l5.ids[i], i);

  auto tally = [&](const std::set<std::string>& codes, std::size_t own, std::size_t other) {
    SexPreferenceTally t;
    for (const auto& code : codes) {
      auto it = row.find(code);
      if (it == row.end()) {
        ++t.not_probed;
        continue;
      }
      ++t.evaluated;
      const double a = table_l5.score(it->second, own);
      const double b = table_l5.score(it->second, other);
      if (a > b) {
        ++t.correct;
      } else if (a == b) {
        ++t.ties;
      }
    }
    if (t.evaluated > 0) t.ratio = static_cast<double>(t.correct) / static_cast<double>(t.evaluated);
    return t;
  };
  return {tally(sets.female_only, f, m), tally(sets.male_only, m, f)};
}

std::vector<std::string> select_probe_codes(const icd::Hierarchy& h,
                                            std::optional<std::size_t> sample, std::uint64_t seed) {
  std::vector<std::string> codes;
  codes.reserve(h.size());
  for (const auto& n : h.leaves()) codes.push_back(n.code);
  if (!sample || *sample >= codes.size()) {
    std::sort(codes.begin(), codes.end());
    return codes;
  }
  std::vector<std::pair<std::string, std::string>> keyed;
  keyed.reserve(codes.size());
  const std::string prefix = std::to_string(seed) + ":";
  for (auto& c : codes) keyed.emplace_back(sha256_hex(prefix + c), std::move(c));
  std::sort(keyed.begin(), keyed.end());
  std::vector<std::string> out;
  out.reserve(*sample);
  for (std::size_t i = 0; i < *sample; ++i) out.push_back(std::move(keyed[i].second));
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace clinbias::intrinsic
