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

#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace clinbias {

// Lowercase hex SHA-256 digest.
std::string sha256_hex(std::string_view data);

std::string_view trim(std::string_view s);
std::string to_lower(std::string_view s);
std::string to_upper(std::string_view s);
std::vector<std::string> split(std::string_view s, char sep);

// Reads a whole file; throws IoError naming the path.
std::string read_file(const std::filesystem::path& path);
// Writes via a temporary sibling and rename, so readers never see a torn file.
void write_file_atomic(const std::filesystem::path& path, std::string_view data);

// Splits text into lines, dropping a trailing '\r' from each.
std::vector<std::string_view> lines_of(std::string_view text);

// Minimal RFC 4180 record splitter for one CSV line (quoted fields, doubled
// quotes). Embedded newlines are not supported.
std::vector<std::string> parse_csv_line(std::string_view line);
// Quotes a CSV field when needed.
std::string csv_field(std::string_view value);

// "%.{digits}f" with round-half-away handled by printf, and "-0.00" folded
// to "0.00".
std::string format_fixed(double value, int digits);

}  // namespace clinbias
