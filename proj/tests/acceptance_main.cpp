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


// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero when any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "clinbias/config.hpp"
#include "clinbias/counterfactual_engine.hpp"
#include "clinbias/error.hpp"
#include "clinbias/extrinsic_eval.hpp"
#include "clinbias/icd_hierarchy.hpp"
#include "clinbias/intrinsic_metrics.hpp"
#include "clinbias/log.hpp"
#include "clinbias/pipeline.hpp"
#include "clinbias/report.hpp"
#include "clinbias/util.hpp"
#include "test_support.hpp"

namespace {

using namespace clinbias;
using clinbias::testing::data_file;
using clinbias::testing::fixture;
using clinbias::testing::TempDir;
using nlohmann::json;
namespace fs = std::filesystem;

// A check records the first failed expectation; later ones still run.
struct Check {
  bool ok = true;
  std::string detail;

  void expect(bool cond, const std::string& what) {
    if (!cond && ok) {
      ok = false;
      detail = what;
    }
  }
};

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

const icd::ChapterBlockTable& chapter_table() {
  static const icd::ChapterBlockTable t =
      icd::ChapterBlockTable::load(data_file("icd10cm/chapter_blocks_2021.json"));
  return t;
}

// Independent evaluation of the normalised mean absolute deviation, in long
// double, without the library's kernels.
long double oracle_assoc_mad(const std::vector<double>& s) {
  long double mu = 0;
  for (double x : s) mu += x;
  mu /= static_cast<long double>(s.size());
  long double dev = 0;
  for (double x : s) dev += std::fabs(static_cast<long double>(x) - mu);
  return dev / static_cast<long double>(s.size()) / mu;
}

// 1: assoc_mad agrees with the brute-force oracle.
Check oracle_equivalence() {
  Check c;
  std::mt19937_64 rng(20260101);
  std::uniform_int_distribution<int> groups(2, 8);
  std::uniform_real_distribution<double> score(1e-6, 1.0);
  double worst = 0;
  for (int i = 0; i < 1000; ++i) {
    std::vector<double> v(static_cast<std::size_t>(groups(rng)));
    for (auto& x : v) x = score(rng);
    const double got = *intrinsic::assoc_mad(v);
    const double want = static_cast<double>(oracle_assoc_mad(v));
    worst = std::max(worst, std::fabs(got - want));
  }
  c.expect(worst <= 1e-12, "max deviation " + num(worst));
  c.expect(*intrinsic::assoc_mad(std::vector<double>{1, 3}) == 0.5, "[1,3] != 0.5");
  c.expect(*intrinsic::assoc_mad(std::vector<double>{1, 1, 1, 5}) == 0.75, "[1,1,1,5] != 0.75");
  if (c.ok) c.detail = "1000 vectors, max deviation " + num(worst);
  return c;
}

// 2: scaling the scores leaves the metric unchanged; sum and mean rollups agree.
Check scale_invariance() {
  Check c;
  std::mt19937_64 rng(77);
  std::uniform_int_distribution<int> groups(2, 8);
  std::uniform_real_distribution<double> score(1e-6, 1.0);
  std::uniform_real_distribution<double> scale(0.0, 10.0);
  double worst = 0;
  for (int i = 0; i < 1000; ++i) {
    std::vector<double> v(static_cast<std::size_t>(groups(rng)));
    for (auto& x : v) x = score(rng);
    double k = 0;
    while (k == 0) k = scale(rng);  // (0, 10]
    std::vector<double> w(v);
    for (auto& x : w) x *= k;
    worst = std::max(worst, std::fabs(*intrinsic::assoc_mad(v) - *intrinsic::assoc_mad(w)));
  }
  c.expect(worst <= 1e-12, "scaled max deviation " + num(worst));

  auto h = icd::Hierarchy::load(fixture("icd_100.tsv"), chapter_table());
  intrinsic::AssociationTable t{icd::Level::kL5, {}, {"A", "B", "C", "D"}, {}};
  std::uniform_real_distribution<double> p(1e-4, 0.05);
  for (const auto& n : h.leaves()) {
    t.ids.push_back(n.code);
    for (int g = 0; g < 4; ++g) t.scores.push_back(p(rng));
  }
  auto by_sum = intrinsic::assoc_mad_report(t, h, intrinsic::Aggregation::kSum);
  auto by_mean = intrinsic::assoc_mad_report(t, h, intrinsic::Aggregation::kMean);
  double worst_level = 0;
  for (std::size_t l = 0; l < 5; ++l) {
    const auto& a = by_sum.levels[l];
    const auto& b = by_mean.levels[l];
    c.expect(a.ids == b.ids, "aggregations cover different ids");
    for (std::size_t i = 0; i < a.values.size() && i < b.values.size(); ++i) {
      worst_level = std::max(worst_level, std::fabs(a.values[i] - b.values[i]));
    }
  }
  c.expect(worst_level <= 1e-12, "sum vs mean rollup deviation " + num(worst_level));
  if (c.ok) c.detail = "max deviation " + num(std::max(worst, worst_level));
  return c;
}

json fixture_config(const fs::path& out, const json& mock) {
  return {{"icd", {{"table", fixture("icd_100.tsv").string()}}},
          {"stimuli", {{"names_csv", fixture("nyc_names.csv").string()}, {"top_k", 5}}},
          {"records", fixture("records_10.jsonl").string()},
          {"backend", {{"kind", "mock"}, {"model_id", "mock-acceptance"}, {"mock", mock}}},
          {"output_dir", out.string()},
          {"retry_attempts", 1},
          {"retry_backoff_ms", 0}};
}

app::RunConfig config_for(const fs::path& out, const json& mock) {
  // Anchored at the fixture directory so the semantic hash is independent of
  // the output location.
  return app::parse_config(fixture_config(out, mock), fixture(""));
}

json oracle_mock() { return json::parse(read_file(fixture("mock_oracle.json"))); }

// 3: equal name probabilities give zero disparity and only ties.
Check zero_disparity() {
  Check c;
  TempDir dir;
  auto cfg = config_for(dir / "out", {{"uniform", true}});
  cfg.include_sex_specific = true;
  app::cmd_probe_intrinsic(cfg);
  auto sec = json::parse(read_file(dir / "out/intrinsic/intrinsic.json"));
  for (const auto& l : sec.at("overall").at("levels")) {
    c.expect(l.at("macro_mean") == 0.0, l.at("level").get<std::string>() + " AssocMAD " +
                                            l.at("macro_mean").dump());
  }
  for (const char* side : {"female", "male"}) {
    const auto& t = sec.at("sex_preference").at(side);
    c.expect(t.at("evaluated").get<int>() > 0, std::string(side) + ": nothing evaluated");
    c.expect(t.at("ties") == t.at("evaluated") && t.at("correct") == 0,
             std::string(side) + ": not all ties " + t.dump());
  }
  if (c.ok) {
    c.detail = "L1..L5 = 0; ties " + sec.at("sex_preference").at("female").at("ties").dump() + "/" +
               sec.at("sex_preference").at("male").at("ties").dump();
  }
  return c;
}

// 4: delta and relative change for the published recall pair.
Check published_arithmetic() {
  Check c;
  auto s = eval::score_from_recalls(Axis::kSex, "Female", eval::Cohort::kAll, 23.16, 19.63);
  const double want_delta = -3.53;
  const double want_pct = -15.26;
  c.expect(std::fabs(s.delta_recall - want_delta) <= 0.01 + 1e-9,
           "delta " + num(s.delta_recall) + " vs " + num(want_delta));
  c.expect(s.pct_change && std::fabs(*s.pct_change - want_pct) <= 0.01 + 1e-9,
           "relative change " + (s.pct_change ? report::fmt_signed(*s.pct_change) : "n/a") +
               "% vs " + num(want_pct) + "% (" + report::fmt_delta_cell(s.delta_recall, s.pct_change) +
               ")");
  if (c.ok) c.detail = report::fmt_delta_cell(s.delta_recall, s.pct_change);
  return c;
}

// 5: a backend echoing the gold descriptions scores perfect recall.
Check perfect_oracle() {
  Check c;
  TempDir dir;
  auto cfg = config_for(dir / "out", oracle_mock());
  app::cmd_run_extrinsic(cfg);
  auto in = app::load_inputs(cfg);
  std::map<std::string, cf::AdmissionRecord> records;
  for (auto& r : cf::load_records(fixture("records_10.jsonl"))) records.emplace(r.record_id, r);
  auto preds = eval::parse_predictions(read_file(dir / "out/extrinsic/predictions.jsonl"));
  for (const auto& p : preds) {
    if (p.variant != "factual") continue;
    auto r = eval::recall_at_levels(p.codes(), records.at(p.record_id).gold_codes, in.hierarchy);
    for (double v : r.levels) {
      c.expect(v == 1.0, p.record_id + "/" + p.placement + " recall " + num(v));
    }
  }
  auto sec = json::parse(read_file(dir / "out/extrinsic/extrinsic.json"));
  c.expect(sec.at("origin").at("All") == 100.0, "origin recall " + sec.at("origin").at("All").dump());
  for (const auto& s : sec.at("scores")) {
    c.expect(s.at("delta") == 0.0, s.at("axis").get<std::string>() + "=" +
                                       s.at("value").get<std::string>() + " delta " +
                                       s.at("delta").dump());
  }
  if (c.ok) c.detail = std::to_string(sec.at("scores").size()) + " scores, all deltas 0";
  return c;
}

// 6: rewriting round-trips; other axes leave notes alone; plan size.
Check counterfactual_integrity() {
  Check c;
  auto lex = cf::GenderLexicon::load(data_file("lexicon/gender_lexicon.tsv"));
  auto notes = cf::load_records(fixture("notes_50.jsonl"));
  c.expect(notes.size() == 50, "corpus has " + std::to_string(notes.size()) + " notes");
  for (const auto& r : notes) {
    auto f = cf::make_counterfactual(r, Axis::kSex, "Female", lex, cf::Placement::kDemographicsFirst);
    auto back = cf::make_counterfactual(f.record, Axis::kSex, "Male", lex,
                                        cf::Placement::kDemographicsFirst);
    c.expect(back.record.note == r.note, r.record_id + ": sex rewrite is not an involution");
    for (const auto& iv : cf::default_interventions()) {
      if (iv.axis == Axis::kSex) continue;
      auto v = cf::make_counterfactual(r, iv.axis, iv.value, lex, cf::Placement::kDemographicsLast);
      c.expect(v.record.note == r.note, r.record_id + ": " + v.descriptor() + " changed the note");
    }
  }
  std::vector<cf::AdmissionRecord> synthetic;
  for (int i = 0; i < 199; ++i) {
    synthetic.push_back({"s" + std::to_string(i), Sex::kMale, Ethnicity::kWhite, Insurance::kOther,
                         "He was admitted.", {"I10"}});
  }
  const auto plan = cf::variant_plan(synthetic, lex);
  c.expect(plan.size() == 2786, "plan has " + std::to_string(plan.size()) + " prompts");
  if (c.ok) c.detail = "50 notes round-trip; 199 records -> " + std::to_string(plan.size()) + " prompts";
  return c;
}

// 7: coarser levels agree whenever a finer level does; prefix law.
Check level_mapping_law() {
  Check c;
  auto h = icd::Hierarchy::load(data_file("icd10cm/icd10cm_order_2021.txt"), chapter_table());
  const auto& leaves = h.leaves();
  std::mt19937_64 rng(4242);
  std::uniform_int_distribution<std::size_t> pick(0, leaves.size() - 1);
  std::size_t finer_matches = 0;
  for (int i = 0; i < 10000; ++i) {
    const auto& gold = leaves[pick(rng)];
    // Half the predictions are near neighbours so that fine levels match.
    const std::size_t j = (i % 2 == 0) ? pick(rng)
                                       : std::min(leaves.size() - 1,
                                                  h.leaf_index(gold.code).value() + (i % 7));
    const auto& pred = leaves[j];
    const std::string& code = gold.code;
    c.expect(h.ancestor_at(code, icd::Level::kL3) == code.substr(0, 3), code + ": L3 prefix");
    c.expect(h.ancestor_at(code, icd::Level::kL4) == code.substr(0, std::min<std::size_t>(4, code.size())),
             code + ": L4 prefix");
    c.expect(h.ancestor_at(code, icd::Level::kL5) == code, code + ": L5 identity");
    const auto* block = chapter_table().block_for(code.substr(0, 3));
    c.expect(block != nullptr && block->id == h.ancestor_at(code, icd::Level::kL2), code + ": block");
    c.expect(block != nullptr && block->chapter == h.ancestor_at(code, icd::Level::kL1),
             code + ": chapter");
    for (int fine = 5; fine >= 2; --fine) {
      const auto lf = static_cast<icd::Level>(fine);
      if (h.ancestor_at(pred.code, lf) != h.ancestor_at(code, lf)) continue;
      if (fine >= 3) ++finer_matches;
      for (int coarse = fine - 1; coarse >= 1; --coarse) {
        const auto lc = static_cast<icd::Level>(coarse);
        c.expect(h.ancestor_at(pred.code, lc) == h.ancestor_at(code, lc),
                 pred.code + " vs " + code + ": match at L" + std::to_string(fine) +
                     " but not at L" + std::to_string(coarse));
      }
    }
  }
  c.expect(finer_matches > 1000, "too few fine-level matches exercised");
  if (c.ok) {
    c.detail = "10000 codes of " + std::to_string(leaves.size()) + ", " +
               std::to_string(finer_matches) + " fine-level matches";
  }
  return c;
}

// 8: bundled sex-specific lists.
Check sex_list_counts() {
  Check c;
  auto s = icd::load_sex_specific(data_file("icd10cm/female_only.txt"),
                                  data_file("icd10cm/male_only.txt"));
  c.expect(s.female_only.size() == 3116, "female-only " + std::to_string(s.female_only.size()));
  c.expect(s.male_only.size() == 529, "male-only " + std::to_string(s.male_only.size()));
  if (c.ok) c.detail = "female-only 3116, male-only 529";
  return c;
}

// 9: interrupted-then-resumed equals uninterrupted; warm cache; wall time.
Check determinism_and_resume() {
  Check c;
  TempDir dir;
  json mock = oracle_mock();
  mock["uniform"] = false;

  const auto start = std::chrono::steady_clock::now();
  auto clean = config_for(dir / "clean", mock);
  app::cmd_ingest(clean);
  app::cmd_probe_intrinsic(clean);
  app::cmd_run_extrinsic(clean);
  app::cmd_report(clean);
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  c.expect(seconds < 60.0, "end-to-end took " + num(seconds) + " s");

  auto resumed = config_for(dir / "resumed", mock);
  app::cmd_ingest(resumed);
  auto interrupted = resumed;
  interrupted.mock_fail_after = 1234;
  bool incomplete = false;
  try {
    app::cmd_probe_intrinsic(interrupted);
  } catch (const IncompleteError&) {
    incomplete = true;
  }
  c.expect(incomplete, "fault injection did not interrupt the probe run");
  c.expect(fs::exists(dir / "resumed/intrinsic/checkpoint.json"), "no checkpoint written");
  auto resumed_counts = app::cmd_probe_intrinsic(resumed);
  c.expect(resumed_counts.cache_hits == 1234,
           "resume reused " + std::to_string(resumed_counts.cache_hits) + " cached results");
  app::cmd_run_extrinsic(resumed);
  app::cmd_report(resumed);
  for (const char* f : {"report.json", "report.md", "report.csv"}) {
    c.expect(read_file(dir / "clean" / f) == read_file(dir / "resumed" / f),
             std::string(f) + " differs after resume");
  }

  auto warm_probe = app::cmd_probe_intrinsic(resumed);
  auto warm_gen = app::cmd_run_extrinsic(resumed);
  c.expect(warm_probe.backend_calls == 0 && warm_gen.backend_calls == 0,
           "warm rerun made " + std::to_string(warm_probe.backend_calls + warm_gen.backend_calls) +
               " backend calls");
  app::cmd_report(resumed);
  c.expect(read_file(dir / "clean/report.json") == read_file(dir / "resumed/report.json"),
           "warm rerun changed the report");
  if (c.ok) {
    std::ostringstream d;
    d.precision(2);
    d << std::fixed << "byte-identical after resume, 0 warm calls, end-to-end " << seconds << " s";
    c.detail = d.str();
  }
  return c;
}

}  // namespace

int main() {
  // Keep the output to one line per criterion.
  clinbias::set_log_sink([](clinbias::LogLevel, std::string_view) {});
  const std::vector<std::pair<std::string, std::function<Check()>>> criteria = {
      {"AssocMAD matches brute-force oracle", oracle_equivalence},
      {"AssocMAD scale invariance; sum and mean rollups agree", scale_invariance},
      {"uniform backend gives zero disparity and all ties", zero_disparity},
      {"extrinsic delta and relative change for recall 23.16 -> 19.63", published_arithmetic},
      {"gold-echo backend gives perfect recall and zero deltas", perfect_oracle},
      {"counterfactual integrity and plan size", counterfactual_integrity},
      {"level-mapping and prefix laws on the 2021 order file", level_mapping_law},
      {"sex-specific list sizes", sex_list_counts},
      {"deterministic resume, warm cache and run time", determinism_and_resume},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Check c;
    try {
      c = criteria[i].second();
    } catch (const std::exception& e) {
      c.ok = false;
      c.detail = std::string("exception: ") + e.what();
    }
    if (!c.ok) ++failed;
    std::printf("[%s] criterion %zu: %s: %s\n", c.ok ? "PASS" : "FAIL", i + 1,
                criteria[i].first.c_str(), c.detail.c_str());
  }
  std::printf("%zu/%zu criteria passed\n", criteria.size() - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
