#pragma once

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <tuple>

namespace scenebench {

struct CacheKey {
  std::string image_digest;
  std::string prompt_sha256;
  std::string model;

  auto operator<=>(const CacheKey&) const = default;
};

CacheKey make_cache_key(std::string_view image_digest, std::string_view prompt,
                        std::string_view model);

/// Judge replies keyed by (image digest, prompt hash, model). When backed by a
/// file, every insert is appended as a JSONL record
/// {"digest", "prompt_sha256", "model", "reply"} and the file is replayed on
/// construction. Reads may run concurrently; writes are serialized.
class AnswerCache {
 public:
  AnswerCache() = default;
  explicit AnswerCache(const std::filesystem::path& path);

  std::optional<std::string> get(const CacheKey& key) const;
  void put(const CacheKey& key, const std::string& reply);
  std::size_t size() const;

 private:
  mutable std::shared_mutex mutex_;
  std::map<CacheKey, std::string> entries_;
  std::ofstream log_;
};

}  // namespace scenebench
