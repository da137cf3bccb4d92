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

// Text embedders and the on-disk description-embedding store.

#pragma once

#include <filesystem>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "clinbias/probe_provider.hpp"

namespace clinbias::embed {

using Vector = std::vector<float>;

// Thread-safe. Throws TransportError when the embedding service fails.
class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual std::string id() const = 0;
  virtual std::vector<Vector> embed(const std::vector<std::string>& texts) = 0;
};

// Counts of each lower-cased byte value; dimension 256.
class CharBagEmbedder : public Embedder {
 public:
  std::string id() const override { return "toy:charbag-256"; }
  std::vector<Vector> embed(const std::vector<std::string>& texts) override;
};

// Lower-cased character trigrams (with boundary padding) hashed into 256
// buckets by FNV-1a.
class TrigramEmbedder : public Embedder {
 public:
  std::string id() const override { return "toy:trigram-256"; }
  std::vector<Vector> embed(const std::vector<std::string>& texts) override;
};

// Native protocol: POST {endpoint}/embed {"model","inputs":[...]} ->
// {"embeddings":[[...], ...]}.
class HttpEmbedder : public Embedder {
 public:
  explicit HttpEmbedder(probe::HttpBackendConfig config) : config_(std::move(config)) {}
  std::string id() const override;
  std::vector<Vector> embed(const std::vector<std::string>& texts) override;

 private:
  probe::HttpBackendConfig config_;
};

// OpenAI-compatible POST {endpoint}/embeddings.
class OpenAiEmbedder : public Embedder {
 public:
  explicit OpenAiEmbedder(probe::HttpBackendConfig config) : config_(std::move(config)) {}
  std::string id() const override;
  std::vector<Vector> embed(const std::vector<std::string>& texts) override;

 private:
  probe::HttpBackendConfig config_;
};

// Append-only binary store at <dir>/embeddings.bin keyed by
// (embedder id, key). Record layout, little-endian:
//   u32 key_len | u32 dim | key bytes | dim x f32 | u32 crc32(key bytes, floats)
// after an 8-byte file magic. Records with a bad checksum are skipped with a
// warning; a torn tail is cut off by the next writer.
class EmbeddingStore {
 public:
  explicit EmbeddingStore(const std::filesystem::path& dir);
  ~EmbeddingStore();
  EmbeddingStore(const EmbeddingStore&) = delete;
  EmbeddingStore& operator=(const EmbeddingStore&) = delete;

  std::optional<Vector> lookup(std::string_view embedder_id, std::string_view key);
  void store(std::string_view embedder_id, std::string_view key, const Vector& v);

  std::size_t size();
  std::size_t corrupt_entries() const { return corrupt_; }

 private:
  void refresh_locked();

  std::filesystem::path file_;
  int fd_ = -1;
  std::mutex mu_;
  std::unordered_map<std::string, Vector> index_;
  std::uint64_t offset_ = 0;
  std::size_t corrupt_ = 0;
};

}  // namespace clinbias::embed
