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

#include "clinbias/report.hpp"

#include <algorithm>
#include <sstream>

#include "clinbias/util.hpp"

namespace clinbias::report {

using nlohmann::json;

namespace {

json opt(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::optional<double> opt_of(const json& v) {
  if (v.is_null()) return std::nullopt;
  return v.get<double>();
}

std::string md_row(const std::vector<std::string>& cells) {
  std::string s = "|";
  for (const auto& c : cells) s += " " + c + " |";
  return s + "\n";
}

std::string md_rule(std::size_t n) {
  std::string s = "|";
  for (std::size_t i = 0; i < n; ++i) s += i == 0 ? "---|" : "---:|";
  return s + "\n";
}

void csv_row(std::string& out, std::string_view section, std::string_view table,
             std::string_view row, std::string_view column, std::string_view value) {
  out += csv_field(section) + "," + csv_field(table) + "," + csv_field(row) + "," +
         csv_field(column) + "," + csv_field(value) + "\n";
}

const json* find_score(const json& scores, std::string_view label, std::string_view cohort) {
  for (const auto& s : scores) {
    if (s.at("axis").get<std::string>() + "=" + s.at("value").get<std::string>() == label &&
        s.at("cohort").get<std::string>() == cohort) {
      return &s;
    }
  }
  return nullptr;
}

// Intervention labels in first-seen order.
std::vector<std::string> labels_of(const json& scores, std::string_view cohort) {
  std::vector<std::string> out;
  for (const auto& s : scores) {
    if (s.at("cohort").get<std::string>() != cohort) continue;
    std::string l = s.at("axis").get<std::string>() + "=" + s.at("value").get<std::string>();
    if (std::find(out.begin(), out.end(), l) == out.end()) out.push_back(l);
  }
  return out;
}

std::string cell_of(const json* s) {
  if (s == nullptr) return "n/a";
  return fmt_delta_cell(s->at("delta").get<double>(), opt_of(s->at("pct_change")));
}

std::string short_label(const std::string& label) { return label.substr(label.find('=') + 1); }

}  // namespace

json levels_json(const intrinsic::AssocMadReport& r) {
  json levels = json::array();
  for (const auto& s : r.levels) {
    levels.push_back({{"level", icd::level_name(s.level)},
                      {"macro_mean", opt(s.macro_mean)},
                      {"diagnoses", s.values.size()},
                      {"zero_mean_excluded", s.zero_mean_excluded}});
  }
  return {{"levels", levels}, {"average", opt(r.average)}};
}

json tally_json(const intrinsic::SexPreferenceTally& t) {
  return {{"evaluated", t.evaluated},
          {"correct", t.correct},
          {"ties", t.ties},
          {"not_probed", t.not_probed},
          {"ratio", opt(t.ratio)}};
}

json score_json(const eval::ExtrinsicScore& s) {
  return {{"axis", to_string(s.axis)},
          {"value", s.value},
          {"cohort", eval::to_string(s.cohort)},
          {"records", s.records},
          {"origin_recall", s.origin_recall},
          {"counterfactual_recall", s.counterfactual_recall},
          {"delta", s.delta_recall},
          {"pct_change", opt(s.pct_change)}};
}

std::string fmt(const json& v) {
  if (v.is_null()) return "n/a";
  return format_fixed(v.get<double>(), 2);
}

std::string fmt_signed(double v) {
  std::string s = format_fixed(v, 2);
  if (s != "0.00" && s.front() != '-') s.insert(s.begin(), '+');
  return s;
}

std::string fmt_delta_cell(double delta, std::optional<double> pct) {
  return fmt_signed(delta) + " (" + (pct ? fmt_signed(*pct) + "%" : std::string("n/a")) + ")";
}

std::string intrinsic_markdown(const json& sec) {
  const std::string model = sec.at("model").get<std::string>();
  std::ostringstream md;
  const json& overall = sec.at("overall");
  md << "### Overall AssocMAD (" << sec.at("scope").get<std::string>() << " diagnoses)\n\n";
  md << md_row({"Model", "L1", "L2", "L3", "L4", "L5", "Avg"}) << md_rule(7);
  std::vector<std::string> row{model};
  for (const auto& l : overall.at("levels")) row.push_back(fmt(l.at("macro_mean")));
  row.push_back(fmt(overall.at("average")));
  md << md_row(row) << "\n";

  md << "Diagnoses per level:";
  for (const auto& l : overall.at("levels")) {
    md << " " << l.at("level").get<std::string>() << "=" << l.at("diagnoses").get<std::size_t>();
    if (l.at("zero_mean_excluded").get<std::size_t>() > 0) {
      md << " (+" << l.at("zero_mean_excluded").get<std::size_t>() << " zero-mean excluded)";
    }
  }
  md << "\n\n";

  md << "### Single-demographic AssocMAD (average over levels)\n\n";
  md << md_row({"Model", "Sex", "Ethnicity"}) << md_rule(3);
  md << md_row({model, fmt(sec.at("single").at("Sex").at("average")),
                fmt(sec.at("single").at("Ethnicity").at("average"))})
     << "\n";

  md << "### Correctness of sex preference\n\n";
  const json& sp = sec.at("sex_preference");
  md << md_row({"Model", "Female", "Male"}) << md_rule(3);
  md << md_row({model, fmt(sp.at("female").at("ratio")), fmt(sp.at("male").at("ratio"))}) << "\n";
  for (const char* side : {"female", "male"}) {
    const json& t = sp.at(side);
    md << side << "-only: " << t.at("correct").get<std::size_t>() << " correct, "
       << t.at("ties").get<std::size_t>() << " ties, " << t.at("evaluated").get<std::size_t>()
       << " evaluated, " << t.at("not_probed").get<std::size_t>() << " not probed\n";
  }
  return md.str();
}

std::string extrinsic_markdown(const json& sec) {
  const std::string model = sec.at("model").get<std::string>();
  const json& scores = sec.at("scores");
  std::ostringstream md;

  md << "### Extrinsic bias score, all records (delta recall, % of origin)\n\n";
  const auto labels = labels_of(scores, "All");
  std::vector<std::string> head{"Model"};
  for (const auto& l : labels) head.push_back(short_label(l));
  md << md_row(head) << md_rule(head.size());
  std::vector<std::string> row{model};
  for (const auto& l : labels) row.push_back(cell_of(find_score(scores, l, "All")));
  md << md_row(row) << "\n";

  md << "### Sex replacement by cohort\n\n";
  md << md_row({"Model", "Sex-neutral", "Sex-specific"}) << md_rule(3);
  md << md_row({model, cell_of(find_score(scores, "Sex=Female", "SexNeutral")),
                cell_of(find_score(scores, "Sex=Female", "SexSpecific"))})
     << "\n";

  md << "### Origin recall (%)\n\n";
  const json& o = sec.at("origin");
  md << md_row({"Model", "All", "Sex-neutral", "Sex-specific"}) << md_rule(4);
  md << md_row({model, fmt(o.at("All")), fmt(o.at("SexNeutral")), fmt(o.at("SexSpecific"))});
  md << "\nRecords: " << sec.at("records").get<std::size_t>() << " ("
     << sec.at("sex_specific_records").get<std::size_t>() << " sex-specific)\n";
  return md.str();
}

std::string intrinsic_csv(const json& sec) {
  std::string out;
  const std::string model = sec.at("model").get<std::string>();
  for (const auto& l : sec.at("overall").at("levels")) {
    csv_row(out, "intrinsic", "assoc_mad", model, l.at("level").get<std::string>(),
            fmt(l.at("macro_mean")));
  }
  csv_row(out, "intrinsic", "assoc_mad", model, "Avg", fmt(sec.at("overall").at("average")));
  for (const char* axis : {"Sex", "Ethnicity"}) {
    csv_row(out, "intrinsic", "single_demographic", model, axis,
            fmt(sec.at("single").at(axis).at("average")));
  }
  const json& sp = sec.at("sex_preference");
  csv_row(out, "intrinsic", "sex_preference", model, "Female", fmt(sp.at("female").at("ratio")));
  csv_row(out, "intrinsic", "sex_preference", model, "Male", fmt(sp.at("male").at("ratio")));
  return out;
}

std::string extrinsic_csv(const json& sec) {
  std::string out;
  const std::string model = sec.at("model").get<std::string>();
  for (const auto& s : sec.at("scores")) {
    const std::string table = "bias_score_" + s.at("cohort").get<std::string>();
    const std::string label = s.at("axis").get<std::string>() + "=" + s.at("value").get<std::string>();
    csv_row(out, "extrinsic", table, model, label + ":delta", fmt_signed(s.at("delta").get<double>()));
    const auto pct = opt_of(s.at("pct_change"));
    csv_row(out, "extrinsic", table, model, label + ":pct", pct ? fmt_signed(*pct) : "n/a");
  }
  for (const char* c : {"All", "SexNeutral", "SexSpecific"}) {
    csv_row(out, "extrinsic", "origin_recall", model, c, fmt(sec.at("origin").at(c)));
  }
  return out;
}

std::string report_markdown(const json& r) {
  std::ostringstream md;
  const json& p = r.at("provenance");
  md << "# Clinical bias report\n\n";
  md << "| Field | Value |\n|---|---|\n";
  for (const char* k : {"backend", "embedder", "config_sha256", "stimuli_sha256", "hierarchy_sha256",
                        "icd_table_version"}) {
    md << "| " << k << " | " << (p.contains(k) ? p.at(k).get<std::string>() : "n/a") << " |\n";
  }
  md << "\n";
  if (r.contains("intrinsic")) md << "## Intrinsic bias\n\n" << intrinsic_markdown(r.at("intrinsic")) << "\n";
  if (r.contains("extrinsic")) md << "## Extrinsic bias\n\n" << extrinsic_markdown(r.at("extrinsic"));
  return md.str();
}

std::string report_csv(const json& r) {
  std::string out = "section,table,row,column,value\n";
  const json& p = r.at("provenance");
  for (auto it = p.begin(); it != p.end(); ++it) {
    if (it.value().is_string()) csv_row(out, "provenance", "run", "", it.key(), it.value().get<std::string>());
  }
  if (r.contains("intrinsic")) out += intrinsic_csv(r.at("intrinsic"));
  if (r.contains("extrinsic")) out += extrinsic_csv(r.at("extrinsic"));
  return out;
}

}  // namespace clinbias::report
