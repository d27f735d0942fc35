#include "scenebench/answer_cache.hpp"

#include <json.hpp>

#include "scenebench/errors.hpp"
#include "scenebench/image.hpp"

namespace scenebench {

using nlohmann::json;

CacheKey make_cache_key(std::string_view image_digest, std::string_view prompt,
                        std::string_view model) {
  return CacheKey{std::string(image_digest), sha256_hex(prompt), std::string(model)};
}

AnswerCache::AnswerCache(const std::filesystem::path& path) {
  if (std::ifstream in(path); in) {
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      try {
        auto rec = json::parse(line);
        entries_.insert_or_assign(
            CacheKey{rec.at("digest").get<std::string>(), rec.at("prompt_sha256").get<std::string>(),
                     rec.at("model").get<std::string>()},
            rec.at("reply").get<std::string>());
      } catch (const json::exception&) {
        // A torn final line from an interrupted run is expected; anything else is not.
        if (in.peek() != EOF) {
          throw StructuralError(path.string() + ":" + std::to_string(lineno) +
                                ": corrupt cache record");
        }
      }
    }
  }
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  log_.open(path, std::ios::app);
  if (!log_) throw Error("cannot open answer cache " + path.string());
}

std::optional<std::string> AnswerCache::get(const CacheKey& key) const {
  std::shared_lock lock(mutex_);
  if (auto it = entries_.find(key); it != entries_.end()) return it->second;
  return std::nullopt;
}

void AnswerCache::put(const CacheKey& key, const std::string& reply) {
  std::unique_lock lock(mutex_);
  entries_.insert_or_assign(key, reply);
  if (log_.is_open()) {
    json rec = {{"digest", key.image_digest},
                {"prompt_sha256", key.prompt_sha256},
                {"model", key.model},
                {"reply", reply}};
    log_ << rec.dump() << '\n';
    log_.flush();
  }
}

std::size_t AnswerCache::size() const {
  std::shared_lock lock(mutex_);
  return entries_.size();
}

}  // namespace scenebench
