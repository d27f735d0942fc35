#include "fixtures.hpp"

#include <cstdlib>

#include "graph_gen.hpp"
#include "scenebench/errors.hpp"
#include "scenebench/image.hpp"
#include "scenebench/questions.hpp"
#include "scenebench/simulation.hpp"

namespace scenebench::testing {

TempDir::TempDir() {
  std::string pattern = (std::filesystem::temp_directory_path() / "scenebench-test-XXXXXX").string();
  if (!mkdtemp(pattern.data())) throw Error("mkdtemp failed");
  path_ = pattern;
}

TempDir::~TempDir() {
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

std::string CountingBackend::complete(const ChatRequest& request) {
  ++calls_;
  {
    std::lock_guard lock(mutex_);
    ++seen_[(request.image ? request.image->digest() : std::string()) + "\n" + request.prompt];
  }
  return inner_->complete(request);
}

std::size_t CountingBackend::duplicate_calls() const {
  std::lock_guard lock(mutex_);
  std::size_t dup = 0;
  for (const auto& [key, n] : seen_) dup += static_cast<std::size_t>(n - 1);
  return dup;
}

std::string ScriptedBackend::complete(const ChatRequest& request) {
  std::size_t index = calls_++;
  {
    std::lock_guard lock(mutex_);
    prompts_.push_back(request.prompt);
  }
  if (failures_left_.fetch_sub(1) > 0) throw BackendError("scripted transient failure", true);
  if (replies_.empty()) return "";
  return replies_[std::min(index, replies_.size() - 1)];
}

std::vector<std::string> ScriptedBackend::prompts() const {
  std::lock_guard lock(mutex_);
  return prompts_;
}

std::vector<DatasetEntry> write_fact_fixture(const std::filesystem::path& dir, int n, std::uint64_t seed) {
  auto vocab = default_relation_vocabulary();
  std::vector<std::string> relations(vocab.begin(), vocab.begin() + 6);
  Rng rng(seed);
  std::vector<DatasetEntry> entries;
  std::filesystem::create_directories(dir / "images");
  for (int i = 0; i < n; ++i) {
    char id[16];
    std::snprintf(id, sizeof id, "s%03d", i);
    SceneGraph g = random_graph(rng, GraphShape{1, 6, 6}, relations);
    SceneGraph gt(g.objects(), g.edges(), std::string(id) + ".json");

    std::vector<ObjectId> removed;
    for (const auto& oid : object_ids(gt)) {
      if (rng.below(4) == 0) removed.push_back(oid);
    }
    SceneGraph world = remove_objects(gt, removed);
    ImageBlob image = encode_fact_image(world);
    write_bytes_file(dir / "images" / (std::string(id) + ".json"), image.bytes());
    entries.push_back(DatasetEntry{id, gt, i % 2 ? std::optional<std::string>("Daily Life") : std::nullopt});
  }
  write_dataset(dir / "dataset.jsonl", entries);
  return entries;
}

}  // namespace scenebench::testing
