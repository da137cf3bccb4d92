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

#include "clinbias/stimuli_registry.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <map>
#include <tuple>

#include <nlohmann/json.hpp>

#include "clinbias/error.hpp"
#include "clinbias/util.hpp"

namespace clinbias::stimuli {
namespace {

using nlohmann::json;

std::size_t joint_index(Sex sex, Ethnicity ethnicity) {
  return (sex == Sex::kFemale ? 0 : 4) + static_cast<std::size_t>(ethnicity);
}

long long parse_count(std::string_view text, std::size_t line_no) {
  text = trim(text);
  long long value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size() || value < 0) {
    throw ParseError("line " + std::to_string(line_no) + ": bad count '" + std::string(text) + "'");
  }
  return value;
}

}  // namespace

DemographicGroup DemographicGroup::make(Sex sex, Ethnicity ethnicity, Insurance insurance) {
  if (sex == Sex::kAny && ethnicity == Ethnicity::kAny && insurance == Insurance::kAny) {
    throw ValidationError("a demographic group needs at least one non-Any axis");
  }
  DemographicGroup g{sex, ethnicity, insurance, {}};
  auto append = [&g](std::string_view part) {
    if (!g.label.empty()) g.label += ' ';
    g.label += part;
  };
  if (ethnicity != Ethnicity::kAny) append(to_string(ethnicity));
  if (sex != Sex::kAny) append(to_string(sex));
  if (insurance != Insurance::kAny) append(to_string(insurance));
  return g;
}

std::optional<Ethnicity> normalize_nyc_ethnicity(std::string_view label) {
  std::string t = to_upper(trim(label));
  if (t == "WHITE NON HISPANIC" || t == "WHITE NON HISP") return Ethnicity::kWhite;
  if (t == "BLACK NON HISPANIC" || t == "BLACK NON HISP") return Ethnicity::kBlack;
  if (t == "HISPANIC") return Ethnicity::kHispanic;
  if (t == "ASIAN AND PACIFIC ISLANDER" || t == "ASIAN AND PACI") return Ethnicity::kAsian;
  return std::nullopt;
}

std::string title_case(std::string_view name) {
  std::string out;
  bool start = true;
  for (char c : trim(name)) {
    unsigned char u = static_cast<unsigned char>(c);
    if (std::isalpha(u)) {
      out.push_back(static_cast<char>(start ? std::toupper(u) : std::tolower(u)));
      start = false;
    } else {
      out.push_back(c);
      start = true;
    }
  }
  return out;
}

std::vector<StimulusGroup> ingest_baby_names(std::string_view csv, const IngestOptions& options) {
  if (options.top_k == 0) throw ValidationError("top_k must be positive");
  auto lines = lines_of(csv);
  std::size_t header_line = 0;
  while (header_line < lines.size() && trim(lines[header_line]).empty()) ++header_line;
  if (header_line == lines.size()) throw ParseError("names CSV is empty");

  auto header = parse_csv_line(lines[header_line]);
  auto column = [&header](std::string_view name) -> std::optional<std::size_t> {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (to_lower(trim(header[i])) == to_lower(name)) return i;
    }
    return std::nullopt;
  };
  auto require = [&column](std::string_view name) {
    auto c = column(name);
    if (!c) throw ParseError("names CSV lacks column '" + std::string(name) + "'");
    return *c;
  };
  const std::size_t gender_col = require("Gender");
  const std::size_t ethnicity_col = require("Ethnicity");
  const std::size_t name_col = require("Child's First Name");
  const std::size_t count_col = require("Count");
  const auto year_col = column("Year of Birth");
  if (!options.years.empty() && !year_col) {
    throw ParseError("names CSV lacks 'Year of Birth' but a year filter was given");
  }

  // (year, group, name) -> count, deduplicating repeated rows.
  std::map<std::tuple<int, std::size_t, std::string>, long long> rows;
  for (std::size_t i = header_line + 1; i < lines.size(); ++i) {
    const std::size_t line_no = i + 1;
    if (trim(lines[i]).empty()) continue;
    std::vector<std::string> f;
    try {
      f = parse_csv_line(lines[i]);
    } catch (const ParseError& e) {
      throw ParseError("line " + std::to_string(line_no) + ": " + e.what());
    }
    const std::size_t needed =
        std::max({gender_col, ethnicity_col, name_col, count_col, year_col.value_or(0)}) + 1;
    if (f.size() < needed) {
      throw ParseError("line " + std::to_string(line_no) + ": expected " +
                       std::to_string(needed) + " fields");
    }
    int year = 0;
    if (year_col) year = static_cast<int>(parse_count(f[*year_col], line_no));
    if (!options.years.empty() && !options.years.contains(year)) continue;
    Sex sex;
    try {
      sex = parse_sex(f[gender_col]);
    } catch (const ValidationError&) {
      throw ParseError("line " + std::to_string(line_no) + ": unknown gender '" + f[gender_col] + "'");
    }
    auto ethnicity = normalize_nyc_ethnicity(f[ethnicity_col]);
    if (!ethnicity) {
      throw ParseError("line " + std::to_string(line_no) + ": unknown ethnicity label '" +
                       f[ethnicity_col] + "'");
    }
    std::string name = title_case(f[name_col]);
    if (name.empty()) continue;
    long long count = parse_count(f[count_col], line_no);
    auto key = std::make_tuple(year, joint_index(sex, *ethnicity), std::move(name));
    auto [it, inserted] = rows.emplace(std::move(key), count);
    if (!inserted) it->second = std::max(it->second, count);
  }

  std::array<std::map<std::string, long long>, 8> totals;
  for (const auto& [key, count] : rows) totals[std::get<1>(key)][std::get<2>(key)] += count;

  std::vector<StimulusGroup> groups;
  for (Sex sex : kSexes) {
    for (Ethnicity eth : kEthnicities) {
      const auto& t = totals[joint_index(sex, eth)];
      std::vector<std::pair<std::string, long long>> ranked(t.begin(), t.end());
      std::stable_sort(ranked.begin(), ranked.end(),
                       [](const auto& a, const auto& b) { return a.second > b.second; });
      StimulusGroup g{DemographicGroup::make(sex, eth), {}};
      if (ranked.size() < options.top_k) {
        throw ValidationError("group " + g.group.label + " has only " +
                              std::to_string(ranked.size()) + " distinct names, need " +
                              std::to_string(options.top_k));
      }
      for (std::size_t i = 0; i < options.top_k; ++i) g.names.push_back(ranked[i].first);
      groups.push_back(std::move(g));
    }
  }
  return groups;
}

std::vector<StimulusGroup> ingest_baby_names_file(const std::filesystem::path& path,
                                                  const IngestOptions& options) {
  try {
    return ingest_baby_names(read_file(path), options);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

std::vector<StimulusGroup> marginal_groups(const std::vector<StimulusGroup>& joint, Axis axis) {
  std::vector<StimulusGroup> out;
  auto pool = [&joint](auto&& matches, DemographicGroup group) {
    StimulusGroup m{std::move(group), {}};
    for (const auto& g : joint) {
      if (matches(g.group)) m.names.insert(m.names.end(), g.names.begin(), g.names.end());
    }
    return m;
  };
  switch (axis) {
    case Axis::kSex:
      for (Sex sex : kSexes) {
        out.push_back(pool([sex](const DemographicGroup& g) { return g.sex == sex; },
                           DemographicGroup::make(sex, Ethnicity::kAny)));
      }
      break;
    case Axis::kEthnicity:
      for (Ethnicity eth : kEthnicities) {
        out.push_back(pool([eth](const DemographicGroup& g) { return g.ethnicity == eth; },
                           DemographicGroup::make(Sex::kAny, eth)));
      }
      break;
    case Axis::kInsurance:
      throw ValidationError("insurance has no name stimuli");
  }
  return out;
}

void validate_groups(const std::vector<StimulusGroup>& groups,
                     std::optional<std::size_t> expected_k) {
  for (const auto& g : groups) {
    if (g.names.empty()) throw ValidationError("group " + g.group.label + " has no names");
    std::set<std::string> seen;
    for (const auto& n : g.names) {
      if (n.empty()) throw ValidationError("group " + g.group.label + " has an empty name");
      if (!seen.insert(n).second) {
        throw ValidationError("group " + g.group.label + " lists '" + n + "' twice");
      }
    }
  }
  if (expected_k) {
    if (groups.size() != 8) {
      throw ValidationError("expected 8 sex x ethnicity groups, got " + std::to_string(groups.size()));
    }
    for (Sex sex : kSexes) {
      for (Ethnicity eth : kEthnicities) {
        auto it = std::find_if(groups.begin(), groups.end(), [&](const StimulusGroup& g) {
          return g.group.sex == sex && g.group.ethnicity == eth;
        });
        if (it == groups.end()) {
          throw ValidationError("missing group " + DemographicGroup::make(sex, eth).label);
        }
        if (it->names.size() != *expected_k) {
          throw ValidationError("group " + it->group.label + " has " +
                                std::to_string(it->names.size()) + " names, expected " +
                                std::to_string(*expected_k));
        }
      }
    }
  }
}

std::string to_json(const std::vector<StimulusGroup>& groups) {
  json doc;
  doc["format"] = "clinbias-stimuli/1";
  json arr = json::array();
  for (const auto& g : groups) {
    arr.push_back({{"label", g.group.label},
                   {"sex", to_string(g.group.sex)},
                   {"ethnicity", to_string(g.group.ethnicity)},
                   {"names", g.names}});
  }
  doc["groups"] = std::move(arr);
  return doc.dump(2) + "\n";
}

std::vector<StimulusGroup> from_json(std::string_view text) {
  std::vector<StimulusGroup> groups;
  try {
    json doc = json::parse(text);
    if (doc.value("format", "") != "clinbias-stimuli/1") {
      throw ParseError("stimuli JSON: unsupported format tag");
    }
    for (const auto& g : doc.at("groups")) {
      auto axis_value = [&g](const char* key) {
        return g.contains(key) ? g.at(key).get<std::string>() : std::string("Any");
      };
      std::string sex_text = axis_value("sex");
      std::string eth_text = axis_value("ethnicity");
      Sex sex = sex_text == "Any" ? Sex::kAny : parse_sex(sex_text);
      Ethnicity eth = eth_text == "Any" ? Ethnicity::kAny : parse_ethnicity(eth_text);
      groups.push_back({DemographicGroup::make(sex, eth),
                        g.at("names").get<std::vector<std::string>>()});
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("stimuli JSON: ") + e.what());
  }
  validate_groups(groups);
  return groups;
}

std::string content_hash(const std::vector<StimulusGroup>& groups) {
  return sha256_hex(to_json(groups));
}

}  // namespace clinbias::stimuli
