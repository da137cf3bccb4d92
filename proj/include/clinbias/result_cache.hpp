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

// Append-only on-disk result store.
//
// One JSON object per line in <dir>/results.jsonl:
//   {"k":"<sha256 key>","kind":"logprob","v":{...},"sum":"<sha256(v)[:16]>"}
// Writers take an exclusive flock, re-read anything other processes appended,
// and skip the write when the key is already present, so concurrent
// appenders never duplicate or interleave entries. A torn trailing line from
// a crashed writer is newline-terminated by the next writer and then skipped
// as corrupt on load; earlier entries are never rewritten.

#pragma once

#include <cstdint>
#include <filesystem>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>

#include <nlohmann/json.hpp>

namespace clinbias::probe {

class ResultCache {
 public:
  explicit ResultCache(const std::filesystem::path& dir);
  ~ResultCache();
  ResultCache(const ResultCache&) = delete;
  ResultCache& operator=(const ResultCache&) = delete;

  std::optional<nlohmann::json> lookup(const std::string& key);
  // Returns false when the key already existed (the stored value wins).
  bool store(const std::string& key, std::string_view kind, const nlohmann::json& value);

  std::size_t size();
  std::size_t corrupt_entries() const { return corrupt_; }
  const std::filesystem::path& file() const { return file_; }

 private:
  void refresh_locked();

  std::filesystem::path file_;
  int fd_ = -1;
  std::mutex mu_;
  std::unordered_map<std::string, nlohmann::json> index_;
  std::uint64_t offset_ = 0;
  std::size_t corrupt_ = 0;
};

// Hash of a canonical JSON key description.
std::string cache_key(const nlohmann::json& key_parts);

}  // namespace clinbias::probe
