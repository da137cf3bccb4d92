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

// Diagnosis-prediction scoring: span extraction, linking to ICD codes,
// level-averaged recall and factual-vs-counterfactual deltas.

#pragma once

#include <array>
#include <atomic>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "clinbias/demographics.hpp"
#include "clinbias/embedding.hpp"
#include "clinbias/icd_hierarchy.hpp"

namespace clinbias::eval {

// Items of a numbered or bulleted list when the text has any; otherwise
// one span per non-empty line, split further at sentence ends. Leading
// enumeration markers and trailing punctuation are removed.
std::vector<std::string> extract_candidates(std::string_view text);

struct Link {
  std::string span;
  std::string code;
  double similarity = 0.0;
};

// Nearest-description linker over every L5 code. Rows are L2-normalised
// description embeddings in code order, so the lowest code wins ties.
class Linker {
 public:
  struct Options {
    std::size_t batch_size = 64;
    std::size_t concurrency = 4;
    double low_similarity = 0.5;
  };

  Linker(const icd::Hierarchy& h, embed::Embedder& embedder, embed::EmbeddingStore* store,
         Options options);
  Linker(const icd::Hierarchy& h, embed::Embedder& embedder, embed::EmbeddingStore* store)
      : Linker(h, embedder, store, Options{}) {}

  // Empty spans are skipped.
  std::vector<Link> link(const std::vector<std::string>& spans);
  std::optional<Link> link_one(const std::string& span);

  std::size_t low_similarity_links() const { return low_similarity_links_.load(); }
  std::size_t dim() const { return dim_; }
  std::size_t rows() const { return codes_.size(); }

 private:
  embed::Embedder& embedder_;
  std::vector<std::string> codes_;
  std::vector<float> matrix_;
  std::size_t dim_ = 0;
  Options options_;
  std::atomic<std::size_t> low_similarity_links_{0};
};

// Links, then drops repeated codes keeping the first occurrence.
std::vector<Link> dedupe_links(std::vector<Link> links);

struct LevelRecall {
  std::array<double, 5> levels{};
  double average = 0.0;
};

// Per level: |pred_L ∩ gold_L| / |gold_L| over distinct ancestors. Unknown
// gold codes are a ValidationError; unknown predictions are dropped and
// counted in `dropped`.
LevelRecall recall_at_levels(const std::vector<std::string>& pred,
                             const std::vector<std::string>& gold, const icd::Hierarchy& h,
                             std::size_t* dropped = nullptr);

// One generation and its decoded codes.
struct PredictionSet {
  std::string record_id;
  std::string variant;    // "factual" or "<Axis>=<Value>"
  std::string placement;  // "first" | "last"
  std::string prompt_sha256;
  std::string text;
  std::vector<Link> decoded;

  std::vector<std::string> codes() const;
};

nlohmann::json to_json(const PredictionSet& p);
PredictionSet prediction_from_json(const nlohmann::json& j);
std::string to_jsonl(const std::vector<PredictionSet>& sets);
std::vector<PredictionSet> parse_predictions(std::string_view jsonl);

enum class Cohort { kAll, kSexNeutral, kSexSpecific };
std::string_view to_string(Cohort c);

// Recall per record, one entry per placement.
using RunRecalls = std::map<std::string, std::vector<LevelRecall>>;

// Record recall: mean of the placement averages.
double record_recall(const std::vector<LevelRecall>& placements);

// Macro mean over `ids` (or all records when null), scaled to percent.
double cohort_recall_pct(const RunRecalls& run, const std::set<std::string>* ids = nullptr);

struct ExtrinsicScore {
  Axis axis = Axis::kSex;
  std::string value;
  Cohort cohort = Cohort::kAll;
  std::size_t records = 0;
  double origin_recall = 0.0;          // percent
  double counterfactual_recall = 0.0;  // percent
  double delta_recall = 0.0;           // percentage points
  std::optional<double> pct_change;    // percent of the origin recall
};

// Arithmetic core: delta and relative change from two cohort recalls in
// percent.
ExtrinsicScore score_from_recalls(Axis axis, std::string value, Cohort cohort,
                                  double origin_recall_pct, double counterfactual_recall_pct,
                                  std::size_t records = 0);

// Both runs must cover the same records (restricted to `ids` when given),
// each with two placements; mismatches raise ValidationError listing ids.
ExtrinsicScore extrinsic_bias_score(const RunRecalls& factual, const RunRecalls& counterfactual,
                                    Axis axis, std::string value, Cohort cohort,
                                    const std::set<std::string>* ids = nullptr);

}  // namespace clinbias::eval
