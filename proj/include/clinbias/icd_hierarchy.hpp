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

// ICD-10-CM diagnosis hierarchy with five levels:
//   L1 chapter ("A00-B99"), L2 block ("A00-A09"), L3 category ("A00"),
//   L4 sub-category ("A000"), L5 full billable code ("A000").
//
// Codes are kept in dotless canonical form ("E119"); dotted input is accepted
// everywhere and `dotted()` produces the display form. A billable code shorter
// than four (or five) characters is its own L4 (and L3) ancestor, so every
// full code maps to exactly one identifier per level.

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace clinbias::icd {

enum class Level : int { kL1 = 1, kL2 = 2, kL3 = 3, kL4 = 4, kL5 = 5 };

inline constexpr std::array<Level, 5> kAllLevels = {Level::kL1, Level::kL2, Level::kL3,
                                                    Level::kL4, Level::kL5};

constexpr std::size_t level_index(Level level) {
  return static_cast<std::size_t>(level) - 1;
}
std::string_view level_name(Level level);
// Accepts "L1".."L5" (case-insensitive) or "1".."5".
Level parse_level(std::string_view text);

// Uppercases and strips dots and surrounding whitespace.
std::string normalize_code(std::string_view code);
// "E119" -> "E11.9"; range identifiers and 3-character codes pass through.
std::string dotted(std::string_view code);

struct DiagnosisNode {
  std::string code;
  std::string description;
  Level level = Level::kL5;
  // lineage[level_index(L)] is the ancestor identifier at L, up to `level`.
  std::array<std::string, 5> lineage;
};

struct Chapter {
  std::string id;
  int number = 0;
  std::string title;
  std::string first;
  std::string last;
};

struct Block {
  std::string id;
  std::string title;
  std::string chapter;
  std::string first;
  std::string last;
  // Categories that belong here although they sort outside first..last.
  std::vector<std::string> members;
};

// Bundled chapter/block definitions (data/icd10cm/chapter_blocks_<year>.json).
class ChapterBlockTable {
 public:
  static ChapterBlockTable from_json(std::string_view text);
  static ChapterBlockTable load(const std::filesystem::path& path);

  const std::string& version() const { return version_; }
  const std::vector<Chapter>& chapters() const { return chapters_; }
  const std::vector<Block>& blocks() const { return blocks_; }

  // Block for a 3-character category: explicit membership first, then the
  // tightest first..last range that contains it.
  const Block* block_for(std::string_view category) const;
  const Chapter* chapter(std::string_view id) const;

 private:
  std::string version_;
  std::vector<Chapter> chapters_;
  std::vector<Block> blocks_;
  std::unordered_map<std::string, std::size_t> member_index_;
};

enum class TableFormat { kAuto, kOrderFile, kTsv };

// Immutable after construction; safe to share across threads.
class Hierarchy {
 public:
  Hierarchy() = default;

  // Parses a CMS order file (fixed width: order number, code, billable flag,
  // short and long description) or a TSV with `code<TAB>description`.
  // Malformed lines raise ParseError("line N: ..."); a code whose category has
  // no block raises StructuralError naming the code.
  static Hierarchy parse(std::string_view source, const ChapterBlockTable& table,
                         TableFormat format = TableFormat::kAuto);
  static Hierarchy load(const std::filesystem::path& path, const ChapterBlockTable& table,
                        TableFormat format = TableFormat::kAuto);

  // Full (L5) codes in ascending code order.
  const std::vector<DiagnosisNode>& leaves() const { return leaves_; }
  std::size_t size() const { return leaves_.size(); }
  bool empty() const { return leaves_.empty(); }

  bool contains(std::string_view code) const;
  std::optional<std::size_t> leaf_index(std::string_view code) const;
  // Throws LookupError for an unknown code.
  const DiagnosisNode& node(std::string_view code) const;

  // Sorted distinct identifiers present at `level`.
  std::vector<std::string> codes_at_level(Level level) const;
  // Throws LookupError for an unknown code.
  const std::string& ancestor_at(std::string_view full_code, Level level) const;
  // Leaf indices below an identifier at `level` (empty if unknown).
  const std::vector<std::uint32_t>& descendants(Level level, std::string_view id) const;
  // Description of an identifier at any level ("" when the table has none).
  std::string description_of(Level level, std::string_view id) const;

  const std::string& table_version() const { return table_version_; }
  // SHA-256 over the canonical leaf table, for provenance.
  std::string content_hash() const;

 private:
  std::string table_version_;
  std::vector<DiagnosisNode> leaves_;
  std::unordered_map<std::string, std::size_t> leaf_by_code_;
  std::array<std::map<std::string, std::vector<std::uint32_t>, std::less<>>, 5> members_;
  std::unordered_map<std::string, std::string> header_descriptions_;
  std::map<std::string, std::string, std::less<>> range_titles_;
};

struct SexSpecificSets {
  std::set<std::string> female_only;
  std::set<std::string> male_only;

  bool is_sex_specific(std::string_view code) const;
};

// Parses newline-delimited code lists ('#' comments and blank lines ignored).
// A code on both lists raises ValidationError naming it.
SexSpecificSets parse_sex_specific(std::string_view female_source, std::string_view male_source);
SexSpecificSets load_sex_specific(const std::filesystem::path& female_path,
                                  const std::filesystem::path& male_path);

}  // namespace clinbias::icd
