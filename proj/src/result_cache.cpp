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

#include "clinbias/result_cache.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <sys/stat.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <string>

#include "clinbias/error.hpp"
#include "clinbias/log.hpp"
#include "clinbias/util.hpp"

namespace clinbias::probe {
namespace {

using nlohmann::json;

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

std::string checksum(const std::string& value_dump) { return sha256_hex(value_dump).substr(0, 16); }

void write_all(int fd, std::string_view data) {
  while (!data.empty()) {
    ssize_t n = ::write(fd, data.data(), data.size());
    if (n < 0) {
      if (errno == EINTR) continue;
      throw IoError(std::string("cache append: ") + std::strerror(errno));
    }
    data.remove_prefix(static_cast<std::size_t>(n));
  }
}

}  // namespace

std::string cache_key(const json& key_parts) { return sha256_hex(key_parts.dump()); }

ResultCache::ResultCache(const std::filesystem::path& dir) : file_(dir / "results.jsonl") {
  std::filesystem::create_directories(dir);
  fd_ = ::open(file_.c_str(), O_RDWR | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
  if (fd_ < 0) throw IoError("cannot open cache " + file_.string() + ": " + std::strerror(errno));
  std::lock_guard lock(mu_);
  refresh_locked();
}

ResultCache::~ResultCache() {
  if (fd_ >= 0) ::close(fd_);
}

void ResultCache::refresh_locked() {
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
  // Only complete lines are consumed; a trailing fragment is re-read later.
  std::size_t consumed = 0;
  while (true) {
    std::size_t nl = buf.find('\n', consumed);
    if (nl == std::string::npos) break;
    std::string_view line(buf.data() + consumed, nl - consumed);
    const std::uint64_t line_offset = offset_ + consumed;
    consumed = nl + 1;
    if (trim(line).empty()) continue;
    try {
      json entry = json::parse(line);
      const std::string key = entry.at("k").get<std::string>();
      json value = entry.at("v");
      if (entry.at("sum").get<std::string>() != checksum(value.dump())) {
        throw std::runtime_error("checksum mismatch");
      }
      index_.try_emplace(key, std::move(value));
    } catch (const std::exception& e) {
      ++corrupt_;
      log_warning("skipping corrupt cache entry at byte " + std::to_string(line_offset) + " of " +
                  file_.string() + " (" + e.what() + ")");
    }
  }
  offset_ += consumed;
}

std::optional<json> ResultCache::lookup(const std::string& key) {
  std::lock_guard lock(mu_);
  auto it = index_.find(key);
  if (it == index_.end()) {
    refresh_locked();
    it = index_.find(key);
    if (it == index_.end()) return std::nullopt;
  }
  return it->second;
}

bool ResultCache::store(const std::string& key, std::string_view kind, const json& value) {
  std::lock_guard lock(mu_);
  FileLock file_lock(fd_);
  refresh_locked();
  if (index_.contains(key)) return false;

  struct stat st {};
  if (::fstat(fd_, &st) != 0) throw IoError("cannot stat " + file_.string());
  std::string line;
  if (st.st_size > 0) {
    char last = '\n';
    if (::pread(fd_, &last, 1, st.st_size - 1) == 1 && last != '\n') line.push_back('\n');
  }
  const std::string value_dump = value.dump();
  json entry = {{"k", key}, {"kind", kind}, {"v", value}, {"sum", checksum(value_dump)}};
  line += entry.dump();
  line.push_back('\n');
  write_all(fd_, line);
  // Our own line is now complete on disk; fold it in through the normal path.
  refresh_locked();
  return true;
}

std::size_t ResultCache::size() {
  std::lock_guard lock(mu_);
  refresh_locked();
  return index_.size();
}

}  // namespace clinbias::probe
