#pragma once

#include <atomic>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "scenebench/chat_backend.hpp"
#include "scenebench/dataset.hpp"

namespace scenebench::testing {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

/// Wraps a backend and counts calls, including repeats of an identical
/// (image, prompt) pair.
class CountingBackend final : public ChatBackend {
 public:
  explicit CountingBackend(std::shared_ptr<ChatBackend> inner) : inner_(std::move(inner)) {}
  std::string model_name() const override { return inner_->model_name(); }
  std::string complete(const ChatRequest& request) override;

  std::size_t calls() const { return calls_.load(); }
  std::size_t duplicate_calls() const;

 private:
  std::shared_ptr<ChatBackend> inner_;
  std::atomic<std::size_t> calls_{0};
  mutable std::mutex mutex_;
  std::map<std::string, int> seen_;
};

/// Replies with a fixed script, one entry per call (the last repeats), and
/// throws a transient BackendError for the first `transient_failures` calls.
class ScriptedBackend final : public ChatBackend {
 public:
  explicit ScriptedBackend(std::vector<std::string> replies, int transient_failures = 0)
      : replies_(std::move(replies)), failures_left_(transient_failures) {}
  std::string model_name() const override { return "scripted"; }
  std::string complete(const ChatRequest& request) override;

  std::size_t calls() const { return calls_.load(); }
  std::vector<std::string> prompts() const;

 private:
  std::vector<std::string> replies_;
  std::atomic<int> failures_left_;
  std::atomic<std::size_t> calls_{0};
  mutable std::mutex mutex_;
  std::vector<std::string> prompts_;
};

/// Writes `n` random samples to dir/dataset.jsonl with fact-set images in
/// dir/images/<id>.json. Each image depicts its graph with a seeded subset of
/// objects removed, so scores vary between samples.
std::vector<DatasetEntry> write_fact_fixture(const std::filesystem::path& dir, int n, std::uint64_t seed);

}  // namespace scenebench::testing
