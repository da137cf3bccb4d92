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

#include "clinbias/pipeline.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>

#include "clinbias/error.hpp"
#include "clinbias/extrinsic_eval.hpp"
#include "clinbias/intrinsic_metrics.hpp"
#include "clinbias/log.hpp"
#include "clinbias/parallel.hpp"
#include "clinbias/probe_provider.hpp"
#include "clinbias/report.hpp"
#include "clinbias/result_cache.hpp"
#include "clinbias/util.hpp"

namespace clinbias::app {

using nlohmann::json;

namespace {

// Marks work skipped after an earlier failure aborted the batch.
struct Skipped {};

void write_json(const fs::path& path, const json& j) { write_file_atomic(path, j.dump(2) + "\n"); }

json read_json(const fs::path& path) {
  try {
    return json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

void update_run_log(const RunConfig& c, const std::string& command, const CallCounts& counts) {
  const fs::path path = c.output_dir / "run_log.json";
  json log = json::object();
  if (fs::exists(path)) {
    try {
      log = json::parse(read_file(path));
    } catch (const std::exception&) {
      log = json::object();
    }
  }
  log[command] = {{"backend_calls", counts.backend_calls}, {"cache_hits", counts.cache_hits}};
  fs::create_directories(c.output_dir);
  write_json(path, log);
}

// Turns per-item failures into the exit-code contract: a run in which every
// request failed re-raises the first backend error; a partial run leaves a
// checkpoint and raises IncompleteError.
void handle_failures(const fs::path& dir,
                     const std::vector<std::pair<std::size_t, std::exception_ptr>>& failures,
                     std::size_t total) {
  const fs::path checkpoint = dir / "checkpoint.json";
  if (failures.empty()) {
    fs::remove(checkpoint);
    return;
  }
  std::exception_ptr first;
  std::string message = "unknown error";
  for (const auto& [i, e] : failures) {
    try {
      std::rethrow_exception(e);
    } catch (const Skipped&) {
      continue;
    } catch (const std::exception& ex) {
      first = e;
      message = ex.what();
    }
    break;
  }
  fs::create_directories(dir);
  write_json(checkpoint, {{"total", total},
                          {"completed", total - failures.size()},
                          {"failed", failures.size()},
                          {"first_error", message}});
  if (failures.size() == total && first) std::rethrow_exception(first);
  throw IncompleteError(std::to_string(failures.size()) + " of " + std::to_string(total) +
                        " backend requests did not complete (" + message +
                        "); rerun the command to resume from the cache");
}

probe::RetryPolicy retry_of(const RunConfig& c) {
  return {std::max(1, c.retry_attempts), std::chrono::milliseconds(std::max(0, c.retry_backoff_ms))};
}

std::vector<cf::AdmissionRecord> load_configured_records(const RunConfig& c,
                                                         const icd::Hierarchy& h) {
  fs::path path = c.records;
  if (path.empty()) path = c.output_dir / "ingest" / "records.jsonl";
  if (!fs::exists(path)) {
    throw ValidationError("no records configured and no ingested records at " + path.string());
  }
  auto records = cf::load_records(path);
  for (const auto& r : records) {
    for (const auto& code : r.gold_codes) {
      if (!h.contains(code)) {
        throw ValidationError(path.string() + ": record " + r.record_id + " has gold code " + code +
                              " that is not an L5 code in the ICD table");
      }
    }
  }
  return records;
}

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

// ---------------------------------------------------------------------------
// Inputs

Inputs load_inputs(const RunConfig& c) {
  Inputs in;
  in.table = icd::ChapterBlockTable::load(c.chapter_blocks);
  in.hierarchy = icd::Hierarchy::load(c.icd_table, in.table, c.icd_format);
  in.sex_sets = icd::load_sex_specific(c.female_only, c.male_only);
  return in;
}

std::vector<stimuli::StimulusGroup> load_stimuli(const RunConfig& c) {
  std::vector<stimuli::StimulusGroup> groups;
  const fs::path ingested = c.output_dir / "ingest" / "stimuli.json";
  if (!c.frozen_stimuli.empty()) {
    groups = stimuli::from_json(read_file(c.frozen_stimuli));
  } else if (fs::exists(ingested)) {
    groups = stimuli::from_json(read_file(ingested));
  } else if (!c.names_csv.empty()) {
    groups = stimuli::ingest_baby_names_file(c.names_csv, {c.top_k, c.years});
  } else {
    throw ValidationError("no name stimuli: configure stimuli.names_csv or stimuli.frozen");
  }
  stimuli::validate_groups(groups, c.top_k);
  return groups;
}

// ---------------------------------------------------------------------------
// Stats

DatasetStats compute_stats(const std::vector<cf::AdmissionRecord>& records,
                           const icd::Hierarchy& h, const icd::SexSpecificSets& sets) {
  DatasetStats s;
  s.records = records.size();
  std::map<std::string, std::size_t> chapter_counts;
  std::map<std::string, std::map<std::string, std::size_t>> demo;
  for (const auto& r : records) {
    if (cf::is_sex_specific(r, sets)) ++s.sex_specific_records;
    if (r.gold_codes.empty()) throw ValidationError("record " + r.record_id + " has no gold codes");
    ++chapter_counts[h.ancestor_at(r.gold_codes.front(), icd::Level::kL1)];
    ++demo["Sex"][std::string(to_string(r.sex))];
    ++demo["Ethnicity"][std::string(to_string(r.ethnicity))];
    ++demo["Insurance"][std::string(to_string(r.insurance))];
  }
  // Chapter ids sort lexicographically in chapter order except where ranges
  // share a first letter; order by the first code of the range instead.
  for (const auto& [id, n] : chapter_counts) {
    s.chapters.emplace_back(id, h.description_of(icd::Level::kL1, id), n);
  }
  std::stable_sort(s.chapters.begin(), s.chapters.end(),
                   [](const auto& a, const auto& b) { return std::get<0>(a) < std::get<0>(b); });
  for (const char* field : {"Sex", "Ethnicity", "Insurance"}) {
    for (const auto& [value, n] : demo[field]) s.demographics.emplace_back(field, value, n);
  }
  return s;
}

std::string chapters_csv(const DatasetStats& s) {
  std::string out = "chapter,title,records\n";
  for (const auto& [id, title, n] : s.chapters) {
    out += csv_field(id) + "," + csv_field(title) + "," + std::to_string(n) + "\n";
  }
  return out;
}

std::string demographics_csv(const DatasetStats& s) {
  std::string out = "field,value,records\n";
  for (const auto& [field, value, n] : s.demographics) {
    out += csv_field(field) + "," + csv_field(value) + "," + std::to_string(n) + "\n";
  }
  return out;
}

std::string summary_csv(const DatasetStats& s) {
  std::string out = "metric,value\n";
  out += "records," + std::to_string(s.records) + "\n";
  out += "sex_specific_records," + std::to_string(s.sex_specific_records) + "\n";
  out += "sex_specific_share_pct," +
         (s.records == 0 ? std::string("n/a")
                         : format_fixed(100.0 * static_cast<double>(s.sex_specific_records) /
                                            static_cast<double>(s.records),
                                        1)) +
         "\n";
  return out;
}

namespace {

void write_stats(const RunConfig& c, const DatasetStats& s) {
  const fs::path dir = c.output_dir / "stats";
  fs::create_directories(dir);
  write_file_atomic(dir / "chapters.csv", chapters_csv(s));
  write_file_atomic(dir / "demographics.csv", demographics_csv(s));
  write_file_atomic(dir / "summary.csv", summary_csv(s));
}

}  // namespace

// ---------------------------------------------------------------------------
// Commands

void cmd_ingest(const RunConfig& c) {
  Inputs in = load_inputs(c);
  const fs::path dir = c.output_dir / "ingest";
  fs::create_directories(dir);

  std::vector<stimuli::StimulusGroup> groups;
  if (!c.frozen_stimuli.empty()) {
    groups = stimuli::from_json(read_file(c.frozen_stimuli));
  } else if (!c.names_csv.empty()) {
    groups = stimuli::ingest_baby_names_file(c.names_csv, {c.top_k, c.years});
  } else {
    throw ValidationError("ingest needs stimuli.names_csv or stimuli.frozen in the config");
  }
  stimuli::validate_groups(groups, c.top_k);
  write_file_atomic(dir / "stimuli.json", stimuli::to_json(groups));

  json levels = json::object();
  for (icd::Level l : icd::kAllLevels) {
    levels[std::string(icd::level_name(l))] = in.hierarchy.codes_at_level(l).size();
  }
  write_json(dir / "hierarchy.json", {{"table_version", in.hierarchy.table_version()},
                                      {"sha256", in.hierarchy.content_hash()},
                                      {"levels", levels},
                                      {"female_only", in.sex_sets.female_only.size()},
                                      {"male_only", in.sex_sets.male_only.size()}});

  if (!c.records.empty()) {
    auto records = load_configured_records(c, in.hierarchy);
    std::string out;
    for (const auto& r : records) out += cf::to_json(r).dump() + "\n";
    write_file_atomic(dir / "records.jsonl", out);
    write_stats(c, compute_stats(records, in.hierarchy, in.sex_sets));
  }
}

void cmd_stats(const RunConfig& c) {
  Inputs in = load_inputs(c);
  write_stats(c, compute_stats(load_configured_records(c, in.hierarchy), in.hierarchy, in.sex_sets));
}

CallCounts cmd_probe_intrinsic(const RunConfig& c) {
  Inputs in = load_inputs(c);
  const auto& h = in.hierarchy;
  const auto groups = load_stimuli(c);
  const auto codes = intrinsic::select_probe_codes(h, c.sample_codes, c.sample_seed);
  std::set<std::string> name_set;
  for (const auto& g : groups) name_set.insert(g.names.begin(), g.names.end());
  const std::vector<std::string> names(name_set.begin(), name_set.end());

  auto backend = make_backend(c);
  probe::ResultCache cache(c.cache_dir);
  probe::ProbeService service(*backend, &cache, retry_of(c));

  intrinsic::NameProbabilities probs(codes, names);
  std::vector<std::string> prompts(codes.size());
  for (std::size_t i = 0; i < codes.size(); ++i) {
    prompts[i] = intrinsic::probe_prompt(h.node(codes[i]).description);
  }
  const std::size_t total = codes.size() * names.size();
  std::atomic<bool> abort{false};
  auto failures = parallel_for(total, c.concurrency, [&](std::size_t i) {
    if (abort.load()) throw Skipped{};
    const std::size_t row = i / names.size();
    const std::size_t col = i % names.size();
    try {
      auto r = service.probe(
          {c.backend.model_id, prompts[row], intrinsic::probe_continuation(names[col])});
      probs.set(row, col, std::exp(c.first_token_only ? r.first_token_log_probability
                                                      : r.log_probability));
    } catch (...) {
      abort.store(true);
      throw;
    }
  });
  const CallCounts counts{service.backend_calls(), service.cache_hits()};
  update_run_log(c, "probe-intrinsic", counts);
  const fs::path dir = c.output_dir / "intrinsic";
  handle_failures(dir, failures, total);
  fs::create_directories(dir);

  // Joint-group scores at L5, kept for audit.
  const auto table = intrinsic::build_table(probs, groups);
  std::string csv = "code";
  for (const auto& g : table.groups) csv += "," + csv_field(g);
  csv += "\n";
  for (std::size_t i = 0; i < table.ids.size(); ++i) {
    csv += table.ids[i];
    for (double v : table.row(i)) csv += "," + fmt17(v);
    csv += "\n";
  }
  write_file_atomic(dir / "association_l5.csv", csv);

  auto scoped = table;
  if (!c.include_sex_specific) {
    scoped = intrinsic::filter_rows(
        table, [&](const std::string& code) { return !in.sex_sets.is_sex_specific(code); });
  }
  const auto overall = intrinsic::assoc_mad_report(scoped, h);
  const auto single_sex =
      intrinsic::single_demographic_assoc_mad(probs, groups, Axis::kSex, h, &scoped.ids);
  const auto single_eth =
      intrinsic::single_demographic_assoc_mad(probs, groups, Axis::kEthnicity, h, &scoped.ids);
  const auto sex_table = intrinsic::build_table(probs, stimuli::marginal_groups(groups, Axis::kSex));
  const auto pref = intrinsic::correctness_of_sex_preference(sex_table, in.sex_sets);

  json section = {
      {"model", c.backend.model_id},
      {"codes", codes.size()},
      {"names", names.size()},
      {"mode", c.first_token_only ? "first_token" : "joint"},
      {"scope", c.include_sex_specific ? "all" : "sex-neutral"},
      {"overall", report::levels_json(overall)},
      {"single",
       {{"Sex", report::levels_json(single_sex)}, {"Ethnicity", report::levels_json(single_eth)}}},
      {"sex_preference",
       {{"female", report::tally_json(pref.female)}, {"male", report::tally_json(pref.male)}}},
  };
  write_json(dir / "intrinsic.json", section);
  write_file_atomic(dir / "intrinsic.md", report::intrinsic_markdown(section));
  write_file_atomic(dir / "intrinsic.csv",
                    "section,table,row,column,value\n" + report::intrinsic_csv(section));
  return counts;
}

namespace {

void score_predictions(const RunConfig& c, const Inputs& in,
                       const std::vector<cf::AdmissionRecord>& records,
                       const std::vector<eval::PredictionSet>& preds) {
  const auto& h = in.hierarchy;
  std::map<std::string, const cf::AdmissionRecord*> by_id;
  std::set<std::string> all_ids, neutral_ids, specific_ids;
  for (const auto& r : records) {
    if (!cf::is_baseline(r)) continue;
    by_id.emplace(r.record_id, &r);
    all_ids.insert(r.record_id);
    (cf::is_sex_specific(r, in.sex_sets) ? specific_ids : neutral_ids).insert(r.record_id);
  }

  std::map<std::string, eval::RunRecalls> runs;
  std::size_t dropped_total = 0;
  for (const auto& p : preds) {
    auto it = by_id.find(p.record_id);
    if (it == by_id.end()) {
      throw ValidationError("prediction for unknown or non-baseline record " + p.record_id);
    }
    std::size_t dropped = 0;
    runs[p.variant][p.record_id].push_back(
        eval::recall_at_levels(p.codes(), it->second->gold_codes, h, &dropped));
    dropped_total += dropped;
  }
  if (dropped_total > 0) {
    log_warning(std::to_string(dropped_total) + " predicted codes were not in the hierarchy and were dropped");
  }
  const eval::RunRecalls& factual = runs["factual"];

  const std::vector<std::pair<eval::Cohort, const std::set<std::string>*>> cohorts = {
      {eval::Cohort::kAll, &all_ids},
      {eval::Cohort::kSexNeutral, &neutral_ids},
      {eval::Cohort::kSexSpecific, &specific_ids}};

  json scores = json::array();
  for (const auto& iv : cf::default_interventions()) {
    if (!c.axes.contains(iv.axis)) continue;
    const std::string label = std::string(to_string(iv.axis)) + "=" + iv.value;
    auto it = runs.find(label);
    if (it == runs.end()) throw ValidationError("predictions lack the " + label + " variant");
    for (const auto& [cohort, ids] : cohorts) {
      if (ids->empty()) continue;
      scores.push_back(report::score_json(
          eval::extrinsic_bias_score(factual, it->second, iv.axis, iv.value, cohort, ids)));
    }
  }
  json origin = json::object();
  for (const auto& [cohort, ids] : cohorts) {
    origin[std::string(eval::to_string(cohort))] =
        ids->empty() ? json(nullptr) : json(eval::cohort_recall_pct(factual, ids));
  }

  json section = {{"model", c.backend.model_id},
                  {"records", all_ids.size()},
                  {"sex_specific_records", specific_ids.size()},
                  {"origin", origin},
                  {"scores", scores}};
  const fs::path dir = c.output_dir / "extrinsic";
  fs::create_directories(dir);
  write_json(dir / "extrinsic.json", section);
  write_file_atomic(dir / "extrinsic.md", report::extrinsic_markdown(section));
  write_file_atomic(dir / "extrinsic.csv",
                    "section,table,row,column,value\n" + report::extrinsic_csv(section));
}

}  // namespace

CallCounts cmd_run_extrinsic(const RunConfig& c) {
  Inputs in = load_inputs(c);
  const auto records = load_configured_records(c, in.hierarchy);
  const auto lexicon = cf::GenderLexicon::load(c.lexicon);
  const auto tpl = c.prompt_template.empty()
                       ? cf::default_prompt_template()
                       : cf::PromptTemplate::from_json(read_json(c.prompt_template));
  const auto plan = cf::variant_plan(records, lexicon, {c.axes});

  auto backend = make_backend(c);
  probe::ResultCache cache(c.cache_dir);
  probe::ProbeService service(*backend, &cache, retry_of(c));
  auto embedder = make_embedder(c);
  // Toy embedders are cheaper to recompute than to store.
  std::unique_ptr<embed::EmbeddingStore> store;
  if (c.embedder.kind != "toy-trigram" && c.embedder.kind != "toy-charbag") {
    store = std::make_unique<embed::EmbeddingStore>(c.cache_dir / "embeddings");
  }
  eval::Linker linker(in.hierarchy, *embedder, store.get(),
                      {c.embedder.batch_size, c.concurrency, c.low_similarity});

  std::vector<eval::PredictionSet> preds(plan.size());
  std::atomic<bool> abort{false};
  auto failures = parallel_for(plan.size(), c.concurrency, [&](std::size_t i) {
    if (abort.load()) throw Skipped{};
    const auto& v = plan[i];
    try {
      const std::string prompt = cf::render_prompt(v, tpl);
      auto g = service.generate({c.backend.model_id, prompt, c.decoding});
      auto links = eval::dedupe_links(linker.link(eval::extract_candidates(g.text)));
      preds[i] = {v.base_record_id,
                  v.descriptor(),
                  std::string(cf::to_string(v.placement)),
                  sha256_hex(prompt),
                  g.text,
                  std::move(links)};
    } catch (...) {
      abort.store(true);
      throw;
    }
  });
  const CallCounts counts{service.backend_calls(), service.cache_hits()};
  update_run_log(c, "run-extrinsic", counts);
  const fs::path dir = c.output_dir / "extrinsic";
  handle_failures(dir, failures, plan.size());
  fs::create_directories(dir);
  write_file_atomic(dir / "predictions.jsonl", eval::to_jsonl(preds));
  if (linker.low_similarity_links() > 0) {
    log_warning(std::to_string(linker.low_similarity_links()) + " links fell below similarity " +
                format_fixed(c.low_similarity, 2));
  }
  score_predictions(c, in, records, preds);
  return counts;
}

void cmd_score(const RunConfig& c) {
  Inputs in = load_inputs(c);
  const auto records = load_configured_records(c, in.hierarchy);
  const fs::path path = c.output_dir / "extrinsic" / "predictions.jsonl";
  if (!fs::exists(path)) {
    throw ValidationError("no predictions at " + path.string() + "; run run-extrinsic first");
  }
  score_predictions(c, in, records, eval::parse_predictions(read_file(path)));
}

void cmd_report(const RunConfig& c) {
  const fs::path intrinsic_path = c.output_dir / "intrinsic" / "intrinsic.json";
  const fs::path extrinsic_path = c.output_dir / "extrinsic" / "extrinsic.json";
  const bool has_in = fs::exists(intrinsic_path);
  const bool has_ex = fs::exists(extrinsic_path);
  if (!has_in && !has_ex) {
    throw ValidationError("nothing to report: run probe-intrinsic or run-extrinsic first");
  }
  Inputs in = load_inputs(c);
  std::string stimuli_hash = "n/a";
  try {
    stimuli_hash = stimuli::content_hash(load_stimuli(c));
  } catch (const ValidationError&) {
    if (has_in) throw;
  }
  json provenance = {{"backend", make_backend(c)->id()},
                     {"embedder", has_ex ? make_embedder(c)->id() : std::string("n/a")},
                     {"config_sha256", c.hash()},
                     {"stimuli_sha256", stimuli_hash},
                     {"hierarchy_sha256", in.hierarchy.content_hash()},
                     {"icd_table_version", in.hierarchy.table_version()},
                     {"config", c.to_json()}};
  json rep = {{"provenance", provenance}};
  if (has_in) rep["intrinsic"] = read_json(intrinsic_path);
  if (has_ex) rep["extrinsic"] = read_json(extrinsic_path);
  fs::create_directories(c.output_dir);
  write_json(c.output_dir / "report.json", rep);
  write_file_atomic(c.output_dir / "report.md", report::report_markdown(rep));
  write_file_atomic(c.output_dir / "report.csv", report::report_csv(rep));
}

}  // namespace clinbias::app
