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

#include "clinbias/embedding.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <sys/stat.h>
#include <unistd.h>
#include <zlib.h>

#include <cctype>
#include <cerrno>
#include <cstring>

#include "clinbias/error.hpp"
#include "clinbias/log.hpp"

namespace clinbias::embed {
namespace {

using nlohmann::json;

constexpr std::size_t kToyDim = 256;
constexpr char kMagic[8] = {'C', 'B', 'E', 'M', 'B', '0', '0', '1'};
constexpr std::uint32_t kMaxKey = 4096;
constexpr std::uint32_t kMaxDim = 1u << 16;

unsigned char lower(unsigned char c) { return static_cast<unsigned char>(std::tolower(c)); }

std::vector<Vector> parse_vectors(const json& arr, std::size_t expected, const std::string& who) {
  if (!arr.is_array() || arr.size() != expected) {
    throw TransportError(who + " returned " + std::to_string(arr.is_array() ? arr.size() : 0) +
                             " embeddings for " + std::to_string(expected) + " inputs",
                         false);
  }
  std::vector<Vector> out;
  out.reserve(expected);
  for (const auto& v : arr) out.push_back(v.get<Vector>());
  return out;
}

std::uint32_t read_u32(const char* p) {
  std::uint32_t v;
  std::memcpy(&v, p, 4);
  return v;
}

void append_u32(std::string& out, std::uint32_t v) {
  char b[4];
  std::memcpy(b, &v, 4);
  out.append(b, 4);
}

std::uint32_t record_crc(std::string_view key, const char* floats, std::size_t nbytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  crc = crc32(crc, reinterpret_cast<const Bytef*>(key.data()), static_cast<uInt>(key.size()));
  crc = crc32(crc, reinterpret_cast<const Bytef*>(floats), static_cast<uInt>(nbytes));
  return static_cast<std::uint32_t>(crc);
}

std::string full_key(std::string_view embedder_id, std::string_view key) {
  std::string k(embedder_id);
  k.push_back('\x1f');
  k.append(key);
  return k;
}

class FileLock {
 public:
  explicit FileLock(int fd) : fd_(fd) {
    while (::flock(fd_, LOCK_EX) != 0) {
      if (errno != EINTR) throw IoError(std::string("flock: ") + std::strerror(errno));
    }
  }
  ~FileLock() { ::flock(fd_, LOCK_UN); }
  FileLock(const FileLock&) = delete;
  FileLock& operator=(const FileLock&) = delete;

 private:
  int fd_;
};

}  // namespace

std::vector<Vector> CharBagEmbedder::embed(const std::vector<std::string>& texts) {
  std::vector<Vector> out;
  out.reserve(texts.size());
  for (const auto& t : texts) {
    Vector v(kToyDim, 0.0f);
    for (unsigned char c : t) v[lower(c)] += 1.0f;
    out.push_back(std::move(v));
  }
  return out;
}

std::vector<Vector> TrigramEmbedder::embed(const std::vector<std::string>& texts) {
  std::vector<Vector> out;
  out.reserve(texts.size());
  for (const auto& t : texts) {
    Vector v(kToyDim, 0.0f);
    std::string padded = "  ";
    for (unsigned char c : t) padded.push_back(static_cast<char>(lower(c)));
    padded += "  ";
    for (std::size_t i = 0; i + 3 <= padded.size(); ++i) {
      std::uint32_t h = 2166136261u;
      for (std::size_t k = i; k < i + 3; ++k) {
        h ^= static_cast<unsigned char>(padded[k]);
        h *= 16777619u;
      }
      v[h % kToyDim] += 1.0f;
    }
    out.push_back(std::move(v));
  }
  return out;
}

std::string HttpEmbedder::id() const { return "http:" + config_.model_id + "@" + config_.endpoint; }

std::vector<Vector> HttpEmbedder::embed(const std::vector<std::string>& texts) {
  json reply = probe::post_json(config_, "/embed", {{"model", config_.model_id}, {"inputs", texts}});
  if (!reply.contains("embeddings")) throw TransportError("embed reply missing 'embeddings'", false);
  return parse_vectors(reply["embeddings"], texts.size(), id());
}

std::string OpenAiEmbedder::id() const {
  return "openai:" + config_.model_id + "@" + config_.endpoint;
}

std::vector<Vector> OpenAiEmbedder::embed(const std::vector<std::string>& texts) {
  json reply =
      probe::post_json(config_, "/embeddings", {{"model", config_.model_id}, {"input", texts}});
  if (!reply.contains("data")) throw TransportError("embeddings reply missing 'data'", false);
  std::vector<Vector> out(texts.size());
  std::vector<bool> seen(texts.size(), false);
  for (const auto& item : reply["data"]) {
    const auto idx = item.at("index").get<std::size_t>();
    if (idx >= texts.size()) throw TransportError("embedding index out of range", false);
    out[idx] = item.at("embedding").get<Vector>();
    seen[idx] = true;
  }
  for (std::size_t i = 0; i < seen.size(); ++i) {
    if (!seen[i]) throw TransportError("embeddings reply lacks input " + std::to_string(i), false);
  }
  return out;
}

// ---------------------------------------------------------------------------
// EmbeddingStore

EmbeddingStore::EmbeddingStore(const std::filesystem::path& dir) : file_(dir / "embeddings.bin") {
  std::filesystem::create_directories(dir);
  fd_ = ::open(file_.c_str(), O_RDWR | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
  if (fd_ < 0) throw IoError("cannot open " + file_.string() + ": " + std::strerror(errno));
  std::lock_guard lock(mu_);
  refresh_locked();
}

EmbeddingStore::~EmbeddingStore() {
  if (fd_ >= 0) ::close(fd_);
}

void EmbeddingStore::refresh_locked() {
  struct stat st {};
  if (::fstat(fd_, &st) != 0) throw IoError("cannot stat " + file_.string());
  const auto end = static_cast<std::uint64_t>(st.st_size);
  if (end <= offset_) return;
  std::string buf(end - offset_, '\0');
  std::size_t got = 0;
  while (got < buf.size()) {
    ssize_t n = ::pread(fd_, buf.data() + got, buf.size() - got, static_cast<off_t>(offset_ + got));
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) break;
    got += static_cast<std::size_t>(n);
  }
  buf.resize(got);
  std::size_t pos = 0;
  if (offset_ == 0) {
    if (buf.size() < sizeof(kMagic)) return;
    if (std::memcmp(buf.data(), kMagic, sizeof(kMagic)) != 0) {
      throw IoError(file_.string() + " is not an embedding store");
    }
    pos = sizeof(kMagic);
  }
  while (buf.size() - pos >= 8) {
    const std::uint32_t key_len = read_u32(buf.data() + pos);
    const std::uint32_t dim = read_u32(buf.data() + pos + 4);
    if (key_len == 0 || key_len > kMaxKey || dim > kMaxDim) break;  // torn or garbage tail
    const std::size_t total = 8 + key_len + 4 * static_cast<std::size_t>(dim) + 4;
    if (buf.size() - pos < total) break;
    std::string_view key(buf.data() + pos + 8, key_len);
    const char* floats = buf.data() + pos + 8 + key_len;
    const std::uint32_t crc = read_u32(floats + 4 * static_cast<std::size_t>(dim));
    if (crc != record_crc(key, floats, 4 * static_cast<std::size_t>(dim))) {
      ++corrupt_;
      log_warning("skipping corrupt embedding record at byte " + std::to_string(offset_ + pos) +
                  " of " + file_.string());
    } else {
      Vector v(dim);
      std::memcpy(v.data(), floats, 4 * static_cast<std::size_t>(dim));
      index_.try_emplace(std::string(key), std::move(v));
    }
    pos += total;
  }
  offset_ += pos;
}

std::optional<Vector> EmbeddingStore::lookup(std::string_view embedder_id, std::string_view key) {
  std::lock_guard lock(mu_);
  const std::string k = full_key(embedder_id, key);
  auto it = index_.find(k);
  if (it == index_.end()) {
    refresh_locked();
    it = index_.find(k);
    if (it == index_.end()) return std::nullopt;
  }
  return it->second;
}

void EmbeddingStore::store(std::string_view embedder_id, std::string_view key, const Vector& v) {
  const std::string k = full_key(embedder_id, key);
  if (k.size() > kMaxKey) throw ValidationError("embedding key too long: " + k);
  if (v.size() > kMaxDim) throw ValidationError("embedding dimension too large");
  std::lock_guard lock(mu_);
  FileLock file_lock(fd_);
  refresh_locked();
  if (index_.contains(k)) return;

  struct stat st {};
  if (::fstat(fd_, &st) != 0) throw IoError("cannot stat " + file_.string());
  std::string rec;
  if (st.st_size == 0) {
    rec.append(kMagic, sizeof(kMagic));
  } else if (static_cast<std::uint64_t>(st.st_size) > offset_) {
    log_warning("truncating torn tail of " + file_.string() + " at byte " + std::to_string(offset_));
    if (::ftruncate(fd_, static_cast<off_t>(offset_)) != 0) {
      throw IoError("cannot truncate " + file_.string());
    }
  }
  append_u32(rec, static_cast<std::uint32_t>(k.size()));
  append_u32(rec, static_cast<std::uint32_t>(v.size()));
  rec += k;
  const char* fbytes = reinterpret_cast<const char*>(v.data());
  rec.append(fbytes, 4 * v.size());
  append_u32(rec, record_crc(k, fbytes, 4 * v.size()));
  std::string_view data(rec);
  while (!data.empty()) {
    ssize_t n = ::write(fd_, data.data(), data.size());
    if (n < 0) {
      if (errno == EINTR) continue;
      throw IoError(std::string("embedding append: ") + std::strerror(errno));
    }
    data.remove_prefix(static_cast<std::size_t>(n));
  }
  refresh_locked();
}

std::size_t EmbeddingStore::size() {
  std::lock_guard lock(mu_);
  refresh_locked();
  return index_.size();
}

}  // namespace clinbias::embed
