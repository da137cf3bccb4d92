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

#include "clinbias/icd_hierarchy.hpp"

#include <algorithm>
#include <cctype>
#include <utility>

#include <nlohmann/json.hpp>

#include "clinbias/error.hpp"
#include "clinbias/util.hpp"

namespace clinbias::icd {
namespace {

using nlohmann::json;

bool valid_code(std::string_view code) {
  if (code.size() < 3 || code.size() > 7) return false;
  if (!std::isalpha(static_cast<unsigned char>(code[0]))) return false;
  return std::all_of(code.begin(), code.end(),
                     [](char c) { return std::isalnum(static_cast<unsigned char>(c)); });
}

struct RawRow {
  std::string code;
  std::string description;
  std::optional<bool> billable;
  std::size_t line = 0;
};

std::string line_prefix(std::size_t line) { return "line " + std::to_string(line) + ": "; }

RawRow parse_order_line(std::string_view line, std::size_t line_no) {
  // 00001 A00     0 Cholera       ...
  // cols: [0,5) order, 5 ' ', [6,13) code, 13 ' ', 14 flag, 15 ' ', [16,76)
  // short description, 76 ' ', [77,..) long description.
  if (line.size() < 17 || line[5] != ' ' || line[13] != ' ' || line[15] != ' ') {
    throw ParseError(line_prefix(line_no) + "not a fixed-width order record");
  }
  for (std::size_t i = 0; i < 5; ++i) {
    if (!std::isdigit(static_cast<unsigned char>(line[i]))) {
      throw ParseError(line_prefix(line_no) + "bad order number");
    }
  }
  if (line[14] != '0' && line[14] != '1') {
    throw ParseError(line_prefix(line_no) + "billable flag must be 0 or 1");
  }
  RawRow row;
  row.line = line_no;
  row.code = normalize_code(line.substr(6, 7));
  if (!valid_code(row.code)) {
    throw ParseError(line_prefix(line_no) + "invalid code '" + std::string(trim(line.substr(6, 7))) + "'");
  }
  row.billable = line[14] == '1';
  std::string_view desc = line.size() > 77 ? line.substr(77) : line.substr(16);
  row.description = std::string(trim(desc));
  return row;
}

RawRow parse_tsv_line(std::string_view line, std::size_t line_no) {
  auto tab = line.find('\t');
  if (tab == std::string_view::npos) {
    throw ParseError(line_prefix(line_no) + "expected code<TAB>description");
  }
  RawRow row;
  row.line = line_no;
  row.code = normalize_code(line.substr(0, tab));
  if (!valid_code(row.code)) {
    throw ParseError(line_prefix(line_no) + "invalid code '" +
                     std::string(trim(line.substr(0, tab))) + "'");
  }
  std::string_view rest = line.substr(tab + 1);
  // An optional third column carries an explicit billable flag.
  auto tab2 = rest.find('\t');
  if (tab2 != std::string_view::npos) {
    std::string_view flag = trim(rest.substr(tab2 + 1));
    if (flag != "0" && flag != "1") {
      throw ParseError(line_prefix(line_no) + "billable column must be 0 or 1");
    }
    row.billable = flag == "1";
    rest = rest.substr(0, tab2);
  }
  row.description = std::string(trim(rest));
  return row;
}

}  // namespace

std::string_view level_name(Level level) {
  static constexpr std::array<std::string_view, 5> kNames = {"L1", "L2", "L3", "L4", "L5"};
  return kNames[level_index(level)];
}

Level parse_level(std::string_view text) {
  std::string t = to_upper(trim(text));
  if (t.size() == 2 && t[0] == 'L') t.erase(0, 1);
  if (t.size() == 1 && t[0] >= '1' && t[0] <= '5') return static_cast<Level>(t[0] - '0');
  throw ValidationError("unknown level '" + std::string(text) + "'");
}

std::string normalize_code(std::string_view code) {
  std::string out;
  for (char c : trim(code)) {
    if (c == '.' || c == ' ') continue;
    out.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
  }
  return out;
}

std::string dotted(std::string_view code) {
  if (code.size() <= 3 || code.find('-') != std::string_view::npos ||
      code.find('.') != std::string_view::npos) {
    return std::string(code);
  }
  return std::string(code.substr(0, 3)) + "." + std::string(code.substr(3));
}

// ---------------------------------------------------------------------------
// ChapterBlockTable

ChapterBlockTable ChapterBlockTable::from_json(std::string_view text) {
  ChapterBlockTable table;
  json doc;
  try {
    doc = json::parse(text);
    table.version_ = doc.at("version").get<std::string>();
    for (const auto& c : doc.at("chapters")) {
      table.chapters_.push_back({c.at("id").get<std::string>(), c.at("number").get<int>(),
                                 c.at("title").get<std::string>(),
                                 c.at("first").get<std::string>(),
                                 c.at("last").get<std::string>()});
    }
    for (const auto& b : doc.at("blocks")) {
      Block block{b.at("id").get<std::string>(), b.at("title").get<std::string>(),
                  b.at("chapter").get<std::string>(), b.at("first").get<std::string>(),
                  b.at("last").get<std::string>(), {}};
      if (b.contains("members")) block.members = b.at("members").get<std::vector<std::string>>();
      table.blocks_.push_back(std::move(block));
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("chapter/block table: ") + e.what());
  }
  for (std::size_t i = 0; i < table.blocks_.size(); ++i) {
    const Block& b = table.blocks_[i];
    if (table.chapter(b.chapter) == nullptr) {
      throw StructuralError("block " + b.id + " refers to unknown chapter " + b.chapter);
    }
    for (const auto& m : b.members) table.member_index_.emplace(m, i);
  }
  return table;
}

ChapterBlockTable ChapterBlockTable::load(const std::filesystem::path& path) {
  return from_json(read_file(path));
}

const Block* ChapterBlockTable::block_for(std::string_view category) const {
  if (auto it = member_index_.find(std::string(category)); it != member_index_.end()) {
    return &blocks_[it->second];
  }
  const Block* best = nullptr;
  for (const Block& b : blocks_) {
    if (category < b.first || category > b.last) continue;
    if (best == nullptr || b.first > best->first ||
        (b.first == best->first && b.last < best->last)) {
      best = &b;
    }
  }
  return best;
}

const Chapter* ChapterBlockTable::chapter(std::string_view id) const {
  for (const Chapter& c : chapters_) {
    if (c.id == id) return &c;
  }
  return nullptr;
}

// ---------------------------------------------------------------------------
// Hierarchy

Hierarchy Hierarchy::parse(std::string_view source, const ChapterBlockTable& table,
                           TableFormat format) {
  std::vector<RawRow> rows;
  std::size_t line_no = 0;
  bool first = true;
  for (std::string_view line : lines_of(source)) {
    ++line_no;
    if (trim(line).empty()) continue;
    if (format == TableFormat::kAuto) {
      format = line.find('\t') != std::string_view::npos ? TableFormat::kTsv
                                                          : TableFormat::kOrderFile;
    }
    if (std::exchange(first, false) && format == TableFormat::kTsv &&
        to_lower(trim(line.substr(0, line.find('\t')))) == "code") {
      continue;  // header
    }
    rows.push_back(format == TableFormat::kTsv ? parse_tsv_line(line, line_no)
                                               : parse_order_line(line, line_no));
  }

  std::sort(rows.begin(), rows.end(),
            [](const RawRow& a, const RawRow& b) { return a.code < b.code; });
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].code == rows[i - 1].code) {
      throw ParseError(line_prefix(rows[i].line) + "duplicate code " + rows[i].code);
    }
  }

  Hierarchy h;
  h.table_version_ = table.version();
  std::unordered_map<std::string, const Block*> block_cache;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const RawRow& row = rows[i];
    bool leaf;
    if (row.billable.has_value()) {
      leaf = *row.billable;
    } else {
      // Sorted order puts any extension of a code directly after it.
      leaf = !(i + 1 < rows.size() && rows[i + 1].code.starts_with(row.code));
    }
    if (!leaf) {
      h.header_descriptions_.emplace(row.code, row.description);
      continue;
    }
    DiagnosisNode node;
    node.code = row.code;
    node.description = row.description;
    node.level = Level::kL5;
    const std::string category = row.code.substr(0, 3);
    auto [cached, inserted] = block_cache.try_emplace(category, nullptr);
    if (inserted) cached->second = table.block_for(category);
    const Block* block = cached->second;
    if (block == nullptr) {
      throw StructuralError("code " + dotted(row.code) + " has no containing block");
    }
    node.lineage[0] = block->chapter;
    node.lineage[1] = block->id;
    node.lineage[2] = category;
    node.lineage[3] = row.code.substr(0, std::min<std::size_t>(4, row.code.size()));
    node.lineage[4] = row.code;
    h.leaves_.push_back(std::move(node));
  }
  for (std::size_t i = 0; i < h.leaves_.size(); ++i) {
    const DiagnosisNode& node = h.leaves_[i];
    h.leaf_by_code_.emplace(node.code, i);
    for (Level level : kAllLevels) {
      h.members_[level_index(level)][node.lineage[level_index(level)]].push_back(
          static_cast<std::uint32_t>(i));
    }
  }
  for (const Chapter& c : table.chapters()) h.range_titles_.emplace(c.id, c.title);
  for (const Block& b : table.blocks()) h.range_titles_.emplace(b.id, b.title);
  return h;
}

Hierarchy Hierarchy::load(const std::filesystem::path& path, const ChapterBlockTable& table,
                          TableFormat format) {
  try {
    return parse(read_file(path), table, format);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

bool Hierarchy::contains(std::string_view code) const {
  return leaf_by_code_.contains(normalize_code(code));
}

std::optional<std::size_t> Hierarchy::leaf_index(std::string_view code) const {
  auto it = leaf_by_code_.find(normalize_code(code));
  if (it == leaf_by_code_.end()) return std::nullopt;
  return it->second;
}

const DiagnosisNode& Hierarchy::node(std::string_view code) const {
  auto idx = leaf_index(code);
  if (!idx) throw LookupError("unknown ICD-10-CM code '" + std::string(code) + "'");
  return leaves_[*idx];
}

std::vector<std::string> Hierarchy::codes_at_level(Level level) const {
  std::vector<std::string> out;
  out.reserve(members_[level_index(level)].size());
  for (const auto& [id, _] : members_[level_index(level)]) out.push_back(id);
  return out;
}

const std::string& Hierarchy::ancestor_at(std::string_view full_code, Level level) const {
  return node(full_code).lineage[level_index(level)];
}

const std::vector<std::uint32_t>& Hierarchy::descendants(Level level, std::string_view id) const {
  static const std::vector<std::uint32_t> kEmpty;
  const auto& m = members_[level_index(level)];
  auto it = m.find(id);
  return it == m.end() ? kEmpty : it->second;
}

std::string Hierarchy::description_of(Level level, std::string_view id) const {
  if (level == Level::kL1 || level == Level::kL2) {
    auto it = range_titles_.find(id);
    return it == range_titles_.end() ? std::string() : it->second;
  }
  if (auto it = leaf_by_code_.find(std::string(id)); it != leaf_by_code_.end()) {
    return leaves_[it->second].description;
  }
  auto it = header_descriptions_.find(std::string(id));
  return it == header_descriptions_.end() ? std::string() : it->second;
}

std::string Hierarchy::content_hash() const {
  std::string canon = "icd-table-version\t" + table_version_ + "\n";
  for (const DiagnosisNode& n : leaves_) {
    canon += n.code;
    canon += '\t';
    canon += n.description;
    for (const auto& l : n.lineage) {
      canon += '\t';
      canon += l;
    }
    canon += '\n';
  }
  return sha256_hex(canon);
}

// ---------------------------------------------------------------------------
// Sex-specific lists

bool SexSpecificSets::is_sex_specific(std::string_view code) const {
  std::string c = normalize_code(code);
  return female_only.contains(c) || male_only.contains(c);
}

namespace {

std::set<std::string> parse_code_list(std::string_view source, std::string_view what) {
  std::set<std::string> out;
  std::size_t line_no = 0;
  for (std::string_view line : lines_of(source)) {
    ++line_no;
    std::string_view t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    std::string code = normalize_code(t);
    if (!valid_code(code)) {
      throw ParseError(std::string(what) + " " + line_prefix(line_no) + "invalid code '" +
                       std::string(t) + "'");
    }
    out.insert(std::move(code));
  }
  return out;
}

}  // namespace

SexSpecificSets parse_sex_specific(std::string_view female_source, std::string_view male_source) {
  SexSpecificSets sets;
  sets.female_only = parse_code_list(female_source, "female-only list");
  sets.male_only = parse_code_list(male_source, "male-only list");
  for (const auto& code : sets.female_only) {
    if (sets.male_only.contains(code)) {
      throw ValidationError("code " + dotted(code) + " is on both the female-only and male-only lists");
    }
  }
  return sets;
}

SexSpecificSets load_sex_specific(const std::filesystem::path& female_path,
                                  const std::filesystem::path& male_path) {
  return parse_sex_specific(read_file(female_path), read_file(male_path));
}

}  // namespace clinbias::icd
