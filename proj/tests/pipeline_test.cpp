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

#include <sys/wait.h>

#include <gtest/gtest.h>

#include <cstdlib>

#include "clinbias/error.hpp"
#include "clinbias/extrinsic_eval.hpp"
#include "clinbias/util.hpp"
#include "test_support.hpp"

namespace clinbias::app {
namespace {

using clinbias::testing::fixture;
using clinbias::testing::TempDir;
using nlohmann::json;

json base_config(const TempDir& dir, json mock) {
  return {{"icd", {{"table", fixture("icd_100.tsv").string()}}},
          {"stimuli", {{"names_csv", fixture("nyc_names.csv").string()}, {"top_k", 5}}},
          {"records", fixture("records_10.jsonl").string()},
          {"backend", {{"kind", "mock"}, {"model_id", "mock-test"}, {"mock", mock}}},
          {"output_dir", (dir / "out").string()},
          {"retry_attempts", 1},
          {"retry_backoff_ms", 0}};
}

json oracle_mock() { return json::parse(read_file(fixture("mock_oracle.json"))); }

json read_json(const fs::path& p) { return json::parse(read_file(p)); }

int run_cli(const fs::path& config, const std::string& command, const std::string& env = "") {
  const std::string cmd = env + " " + CLINBIAS_CLI_PATH + " -c " + config.string() + " " + command +
                          " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

fs::path write_config(const TempDir& dir, const json& cfg) {
  write_file_atomic(dir / "config.json", cfg.dump(2));
  return dir / "config.json";
}

TEST(Pipeline, IngestFreezesStimuliAndWritesStats) {
  TempDir dir;
  auto c = parse_config(base_config(dir, oracle_mock()), dir.path());
  cmd_ingest(c);
  const fs::path out = dir / "out";
  auto groups = stimuli::from_json(read_file(out / "ingest/stimuli.json"));
  EXPECT_EQ(groups.size(), 8u);
  auto h = read_json(out / "ingest/hierarchy.json");
  EXPECT_EQ(h.at("levels").at("L5"), 100);
  EXPECT_EQ(h.at("female_only"), 3116);
  const std::string summary = read_file(out / "stats/summary.csv");
  EXPECT_NE(summary.find("records,10\n"), std::string::npos) << summary;
  EXPECT_NE(summary.find("sex_specific_records,2\n"), std::string::npos) << summary;
  EXPECT_NE(summary.find("sex_specific_share_pct,20.0\n"), std::string::npos) << summary;
  EXPECT_NE(read_file(out / "stats/demographics.csv").find("Sex,Male,10\n"), std::string::npos);
  // Later commands reuse the frozen stimuli even without the CSV.
  c.names_csv.clear();
  EXPECT_EQ(load_stimuli(c).size(), 8u);
}

TEST(Pipeline, ChapterStatsCountFirstGoldCode) {
  TempDir dir;
  auto c = parse_config(base_config(dir, oracle_mock()), dir.path());
  auto in = load_inputs(c);
  auto records = cf::load_records(fixture("records_10.jsonl"));
  auto s = compute_stats(records, in.hierarchy, in.sex_sets);
  std::size_t total = 0;
  for (const auto& [id, title, n] : s.chapters) total += n;
  EXPECT_EQ(total, 10u);
  EXPECT_EQ(s.sex_specific_records, 2u);
}

TEST(Pipeline, UniformMockGivesZeroDisparityAndAllTies) {
  TempDir dir;
  json mock = {{"uniform", true}};
  auto c = parse_config(base_config(dir, mock), dir.path());
  auto counts = cmd_probe_intrinsic(c);
  EXPECT_EQ(counts.backend_calls, 100u * 38u);
  auto sec = read_json(dir / "out/intrinsic/intrinsic.json");
  for (const auto& l : sec.at("overall").at("levels")) EXPECT_EQ(l.at("macro_mean"), 0.0);
  const auto& f = sec.at("sex_preference").at("female");
  EXPECT_EQ(f.at("ties"), f.at("evaluated"));
  EXPECT_EQ(f.at("correct"), 0);
  EXPECT_EQ(sec.at("scope"), "sex-neutral");
}

TEST(Pipeline, OracleBackendScoresPerfectRecall) {
  TempDir dir;
  auto c = parse_config(base_config(dir, oracle_mock()), dir.path());
  auto counts = cmd_run_extrinsic(c);
  EXPECT_EQ(counts.backend_calls, 140u);
  auto sec = read_json(dir / "out/extrinsic/extrinsic.json");
  EXPECT_EQ(sec.at("origin").at("All"), 100.0);
  for (const auto& s : sec.at("scores")) EXPECT_EQ(s.at("delta"), 0.0);
  // Rescoring stored predictions reproduces the section byte for byte.
  const std::string before = read_file(dir / "out/extrinsic/extrinsic.json");
  cmd_score(c);
  EXPECT_EQ(read_file(dir / "out/extrinsic/extrinsic.json"), before);
  EXPECT_EQ(cf::load_records(fixture("records_10.jsonl")).size() * 14,
            eval::parse_predictions(read_file(dir / "out/extrinsic/predictions.jsonl")).size());
}

TEST(Pipeline, ReportNeedsASection) {
  TempDir dir;
  auto c = parse_config(base_config(dir, oracle_mock()), dir.path());
  EXPECT_THROW(cmd_report(c), ValidationError);
}

TEST(Cli, ExitCodesFollowTheErrorContract) {
  TempDir dir;
  json cfg = base_config(dir, oracle_mock());
  const fs::path path = write_config(dir, cfg);
  EXPECT_EQ(run_cli(path, "score"), 2);  // no predictions yet
  EXPECT_EQ(run_cli(path, "probe-intrinsic", "CLINBIAS_MOCK_FAIL_AFTER=0"), 3);
  EXPECT_EQ(run_cli(path, "probe-intrinsic", "CLINBIAS_MOCK_FAIL_AFTER=500"), 4);
  EXPECT_TRUE(fs::exists(dir / "out/intrinsic/checkpoint.json"));
  EXPECT_EQ(run_cli(path, "probe-intrinsic"), 0);
  EXPECT_FALSE(fs::exists(dir / "out/intrinsic/checkpoint.json"));
  EXPECT_EQ(read_json(dir / "out/run_log.json").at("probe-intrinsic").at("backend_calls"), 3300);
  EXPECT_EQ(run_cli(path, "report"), 0);
  EXPECT_TRUE(fs::exists(dir / "out/report.md"));
  EXPECT_NE(run_cli(path, "no-such-command"), 0);
}

TEST(Cli, BadConfigIsExitTwo) {
  TempDir dir;
  json cfg = base_config(dir, oracle_mock());
  cfg["records"] = (dir / "missing.jsonl").string();
  EXPECT_EQ(run_cli(write_config(dir, cfg), "stats"), 2);
  cfg["backend"]["mock"] = {{"bogus", 1}};
  EXPECT_EQ(run_cli(write_config(dir, cfg), "run-extrinsic"), 2);
}

TEST(Cli, SampleAndFirstTokenFlags) {
  TempDir dir;
  const fs::path path = write_config(dir, base_config(dir, json::object()));
  ASSERT_EQ(run_cli(path, "probe-intrinsic --sample 10 --first-token-only --include-sex-specific"), 0);
  auto sec = read_json(dir / "out/intrinsic/intrinsic.json");
  EXPECT_EQ(sec.at("codes"), 10);
  EXPECT_EQ(sec.at("mode"), "first_token");
  EXPECT_EQ(sec.at("scope"), "all");
}

}  // namespace
}  // namespace clinbias::app
