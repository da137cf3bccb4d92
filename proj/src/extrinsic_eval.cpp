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

#include "clinbias/extrinsic_eval.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <regex>
#include <unordered_set>

#include "clinbias/error.hpp"
#include "clinbias/kernels.hpp"
#include "clinbias/log.hpp"
#include "clinbias/parallel.hpp"
#include "clinbias/util.hpp"

namespace clinbias::eval {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Candidate extraction

namespace {

// "1.", "2)", "(3)", "-", "*", "+", or a UTF-8 bullet, followed by space.
const std::regex& list_marker() {
  static const std::regex re(R"(^\s*(?:\d{1,3}[.)]|\(\d{1,3}\)|[-*+]|\xE2\x80\xA2)\s+)");
  return re;
}

std::string clean_span(std::string_view s) {
  s = trim(s);
  auto strip_front = [&](std::string_view chars) {
    while (!s.empty() && chars.find(s.front()) != std::string_view::npos) s.remove_prefix(1);
  };
  auto strip_back = [&](std::string_view chars) {
    while (!s.empty() && chars.find(s.back()) != std::string_view::npos) s.remove_suffix(1);
  };
  strip_front("*_\"' \t");
  strip_back("*_\"' \t.,;:!?");
  return std::string(s);
}

std::vector<std::string> split_sentences(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if ((c == '.' || c == '!' || c == '?' || c == ';') &&
        (i + 1 == line.size() || std::isspace(static_cast<unsigned char>(line[i + 1])))) {
      out.emplace_back(line.substr(start, i + 1 - start));
      start = i + 1;
    }
  }
  if (start < line.size()) out.emplace_back(line.substr(start));
  return out;
}

}  // namespace

std::vector<std::string> extract_candidates(std::string_view text) {
  std::vector<std::string> out;
  const auto lines = lines_of(text);
  bool has_list = false;
  for (auto line : lines) {
    if (std::regex_search(line.begin(), line.end(), list_marker())) {
      has_list = true;
      break;
    }
  }
  for (auto line : lines) {
    std::cmatch m;
    if (has_list) {
      if (!std::regex_search(line.begin(), line.end(), m, list_marker())) continue;
      std::string span = clean_span(line.substr(static_cast<std::size_t>(m.length(0))));
      if (!span.empty()) out.push_back(std::move(span));
      continue;
    }
    for (const auto& sentence : split_sentences(line)) {
      std::string span = clean_span(sentence);
      if (!span.empty()) out.push_back(std::move(span));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Linking

namespace {

void normalize(float* v, std::size_t dim) {
  const double ss = kernels::active().sum_squares(v, dim);
  if (ss <= 0.0) return;
  const double inv = 1.0 / std::sqrt(ss);
  for (std::size_t i = 0; i < dim; ++i) v[i] = static_cast<float>(v[i] * inv);
}

}  // namespace

Linker::Linker(const icd::Hierarchy& h, embed::Embedder& embedder, embed::EmbeddingStore* store,
               Options options)
    : embedder_(embedder), options_(options) {
  std::vector<std::pair<std::string, std::string>> rows;
  rows.reserve(h.size());
  for (const auto& n : h.leaves()) rows.emplace_back(n.code, n.description);
  std::sort(rows.begin(), rows.end());

  const std::string eid = embedder.id();
  std::vector<embed::Vector> vectors(rows.size());
  std::vector<std::string> keys(rows.size());
  std::vector<std::size_t> missing;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    keys[i] = rows[i].first + "#" + sha256_hex(rows[i].second).substr(0, 12);
    if (store != nullptr) {
      if (auto v = store->lookup(eid, keys[i])) {
        vectors[i] = std::move(*v);
        continue;
      }
    }
    missing.push_back(i);
  }

  const std::size_t batch = std::max<std::size_t>(1, options_.batch_size);
  const std::size_t batches = (missing.size() + batch - 1) / batch;
  auto failures = parallel_for(batches, options_.concurrency, [&](std::size_t b) {
    std::vector<std::string> texts;
    const std::size_t lo = b * batch;
    const std::size_t hi = std::min(missing.size(), lo + batch);
    for (std::size_t k = lo; k < hi; ++k) texts.push_back(rows[missing[k]].second);
    auto got = embedder_.embed(texts);
    for (std::size_t k = lo; k < hi; ++k) {
      vectors[missing[k]] = std::move(got[k - lo]);
      if (store != nullptr) store->store(eid, keys[missing[k]], vectors[missing[k]]);
    }
  });
  if (!failures.empty()) std::rethrow_exception(failures.front().second);

  codes_.reserve(rows.size());
  for (auto& r : rows) codes_.push_back(std::move(r.first));
  if (vectors.empty()) return;
  dim_ = vectors.front().size();
  if (dim_ == 0) throw TransportError(eid + " returned empty embeddings", false);
  matrix_.resize(codes_.size() * dim_);
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    if (vectors[i].size() != dim_) {
      throw TransportError(eid + " returned inconsistent embedding dimensions", false);
    }
    std::copy(vectors[i].begin(), vectors[i].end(), matrix_.begin() + static_cast<std::ptrdiff_t>(i * dim_));
    normalize(matrix_.data() + i * dim_, dim_);
  }
}

std::optional<Link> Linker::link_one(const std::string& span) {
  auto links = link({span});
  if (links.empty()) return std::nullopt;
  return links.front();
}

std::vector<Link> Linker::link(const std::vector<std::string>& spans) {
  std::vector<std::string> texts;
  for (const auto& s : spans) {
    if (!trim(s).empty()) texts.push_back(s);
  }
  std::vector<Link> out;
  if (texts.empty() || codes_.empty()) return out;
  auto vectors = embedder_.embed(texts);
  if (vectors.size() != texts.size()) {
    throw TransportError(embedder_.id() + " returned the wrong number of embeddings", false);
  }
  std::vector<float> sims(codes_.size());
  for (std::size_t i = 0; i < texts.size(); ++i) {
    auto& q = vectors[i];
    if (q.size() != dim_) throw TransportError(embedder_.id() + " changed embedding dimension", false);
    normalize(q.data(), dim_);
    kernels::dot_rows(matrix_, dim_, q, sims);
    const std::size_t best = kernels::argmax_first(sims);
    const double sim = sims[best];
    // Each link keeps its similarity; callers report the aggregate count.
    if (sim < options_.low_similarity) low_similarity_links_.fetch_add(1);
    out.push_back({texts[i], codes_[best], sim});
  }
  return out;
}

std::vector<Link> dedupe_links(std::vector<Link> links) {
  std::unordered_set<std::string> seen;
  std::vector<Link> out;
  for (auto& l : links) {
    if (seen.insert(l.code).second) out.push_back(std::move(l));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Recall

LevelRecall recall_at_levels(const std::vector<std::string>& pred,
                             const std::vector<std::string>& gold, const icd::Hierarchy& h,
                             std::size_t* dropped) {
  if (gold.empty()) throw PreconditionError("recall needs a non-empty gold code set");
  std::vector<std::string> gold_n;
  for (const auto& g : gold) {
    std::string c = icd::normalize_code(g);
    if (!h.contains(c)) throw ValidationError("gold code " + g + " is not an L5 code in the hierarchy");
    gold_n.push_back(std::move(c));
  }
  std::vector<std::string> pred_n;
  std::size_t drop = 0;
  for (const auto& p : pred) {
    std::string c = icd::normalize_code(p);
    if (!h.contains(c)) {
      ++drop;
      continue;
    }
    pred_n.push_back(std::move(c));
  }
  if (dropped != nullptr) *dropped = drop;

  LevelRecall r;
  double total = 0.0;
  for (icd::Level level : icd::kAllLevels) {
    std::set<std::string_view> g, p;
    for (const auto& c : gold_n) g.insert(h.ancestor_at(c, level));
    for (const auto& c : pred_n) p.insert(h.ancestor_at(c, level));
    std::size_t hit = 0;
    for (auto id : g) hit += p.contains(id) ? 1 : 0;
    const double v = static_cast<double>(hit) / static_cast<double>(g.size());
    r.levels[icd::level_index(level)] = v;
    total += v;
  }
  r.average = total / 5.0;
  return r;
}

// ---------------------------------------------------------------------------
// Artifacts

std::vector<std::string> PredictionSet::codes() const {
  std::vector<std::string> out;
  out.reserve(decoded.size());
  for (const auto& l : decoded) out.push_back(l.code);
  return out;
}

json to_json(const PredictionSet& p) {
  json decoded = json::array();
  for (const auto& l : p.decoded) {
    decoded.push_back({{"span", l.span}, {"code", l.code}, {"similarity", l.similarity}});
  }
  return {{"record_id", p.record_id},   {"variant", p.variant}, {"placement", p.placement},
          {"prompt_sha256", p.prompt_sha256}, {"text", p.text}, {"decoded", decoded}};
}

PredictionSet prediction_from_json(const json& j) {
  PredictionSet p;
  p.record_id = j.at("record_id").get<std::string>();
  p.variant = j.at("variant").get<std::string>();
  p.placement = j.at("placement").get<std::string>();
  p.prompt_sha256 = j.value("prompt_sha256", "");
  p.text = j.value("text", "");
  for (const auto& d : j.at("decoded")) {
    p.decoded.push_back(
        {d.at("span").get<std::string>(), d.at("code").get<std::string>(), d.at("similarity").get<double>()});
  }
  return p;
}

std::string to_jsonl(const std::vector<PredictionSet>& sets) {
  std::string out;
  for (const auto& s : sets) {
    out += to_json(s).dump();
    out.push_back('\n');
  }
  return out;
}

std::vector<PredictionSet> parse_predictions(std::string_view jsonl) {
  std::vector<PredictionSet> out;
  std::size_t line_no = 0;
  for (auto line : lines_of(jsonl)) {
    ++line_no;
    if (trim(line).empty()) continue;
    try {
      out.push_back(prediction_from_json(json::parse(line)));
    } catch (const json::exception& e) {
      throw ParseError("predictions line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Scores

std::string_view to_string(Cohort c) {
  switch (c) {
    case Cohort::kAll: return "All";
    case Cohort::kSexNeutral: return "SexNeutral";
    case Cohort::kSexSpecific: return "SexSpecific";
  }
  return "?";
}

double record_recall(const std::vector<LevelRecall>& placements) {
  if (placements.empty()) throw PreconditionError("record has no placement results");
  double total = 0.0;
  for (const auto& p : placements) total += p.average;
  return total / static_cast<double>(placements.size());
}

double cohort_recall_pct(const RunRecalls& run, const std::set<std::string>* ids) {
  double total = 0.0;
  std::size_t n = 0;
  for (const auto& [id, placements] : run) {
    if (ids != nullptr && !ids->contains(id)) continue;
    total += record_recall(placements);
    ++n;
  }
  if (n == 0) return 0.0;
  return 100.0 * total / static_cast<double>(n);
}

ExtrinsicScore score_from_recalls(Axis axis, std::string value, Cohort cohort,
                                  double origin_recall_pct, double counterfactual_recall_pct,
                                  std::size_t records) {
  ExtrinsicScore s;
  s.axis = axis;
  s.value = std::move(value);
  s.cohort = cohort;
  s.records = records;
  s.origin_recall = origin_recall_pct;
  s.counterfactual_recall = counterfactual_recall_pct;
  s.delta_recall = counterfactual_recall_pct - origin_recall_pct;
  if (origin_recall_pct > 0.0) s.pct_change = 100.0 * s.delta_recall / origin_recall_pct;
  return s;
}

ExtrinsicScore extrinsic_bias_score(const RunRecalls& factual, const RunRecalls& counterfactual,
                                    Axis axis, std::string value, Cohort cohort,
                                    const std::set<std::string>* ids) {
  auto in_scope = [&](const std::string& id) { return ids == nullptr || ids->contains(id); };
  std::vector<std::string> missing_cf, missing_factual, bad_placements;
  std::size_t n = 0;
  for (const auto& [id, placements] : factual) {
    if (!in_scope(id)) continue;
    ++n;
    if (placements.size() != 2) bad_placements.push_back(id);
    auto it = counterfactual.find(id);
    if (it == counterfactual.end()) {
      missing_cf.push_back(id);
    } else if (it->second.size() != 2) {
      bad_placements.push_back(id);
    }
  }
  for (const auto& [id, placements] : counterfactual) {
    if (in_scope(id) && !factual.contains(id)) missing_factual.push_back(id);
  }
  auto join = [](const std::vector<std::string>& v) {
    std::string s;
    for (const auto& x : v) s += (s.empty() ? "" : ", ") + x;
    return s;
  };
  if (!missing_cf.empty() || !missing_factual.empty()) {
    std::string msg = "factual and counterfactual runs cover different records";
    if (!missing_cf.empty()) msg += "; missing from counterfactual: " + join(missing_cf);
    if (!missing_factual.empty()) msg += "; missing from factual: " + join(missing_factual);
    throw ValidationError(msg);
  }
  if (!bad_placements.empty()) {
    throw ValidationError("records without exactly two placements: " + join(bad_placements));
  }
  return score_from_recalls(axis, std::move(value), cohort, cohort_recall_pct(factual, ids),
                            cohort_recall_pct(counterfactual, ids), n);
}

}  // namespace clinbias::eval
