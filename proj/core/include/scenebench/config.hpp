#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "scenebench/annotate.hpp"
#include "scenebench/backend_config.hpp"
#include "scenebench/chat_backend.hpp"
#include "scenebench/generation.hpp"

namespace scenebench {

/// Everything a CLI run needs. Defaults: alpha 0.5, gamma 0, lambda0 = lambda1
/// = 0.5, one feedback iteration.
struct RunConfig {
  double alpha = 0.5;
  double gamma = 0.0;
  double lambda0 = 0.5;
  double lambda1 = 0.5;
  std::uint64_t seed = 0;
  int max_iterations = 1;
  /// Samples evaluated concurrently.
  std::size_t concurrency = 4;
  /// Judge questions in flight per sample.
  std::size_t judge_parallelism = 1;

  BackendConfig judge;
  BackendConfig generation;
  BackendConfig composer;
  BackendConfig annotator;
  /// Answer cache JSONL; empty disables caching.
  std::filesystem::path cache;

  std::filesystem::path dataset;
  std::filesystem::path images_dir;
  std::filesystem::path labels;
  std::filesystem::path output_dir = "out";

  /// Relation vocabulary for distractors; empty selects the built-in list.
  std::vector<std::string> vocab;
  /// Feedback settings to run: any of "baseline", "composition", "feedback".
  std::vector<std::string> settings = {"baseline", "composition", "feedback"};

  // Dataset construction.
  std::size_t min_freq = 100;
  std::filesystem::path synonyms;
  LevelQuotas quotas;
  std::size_t classify_batch = 16;

  // Study server.
  std::filesystem::path tasks;
  std::filesystem::path static_dir;
  std::string host = "127.0.0.1";
  int port = 8080;

  /// Throws ConfigError naming the first field outside its domain.
  void validate() const;
};

using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;

/// Reads the process environment.
std::optional<std::string> process_env(const std::string& name);

/// Replaces every ${NAME} with the variable's value. Throws ConfigError for an
/// unset variable or an unterminated reference. "$$" yields a literal "$".
std::string interpolate_env(std::string_view text, const EnvLookup& env);

/// Parses a JSON config over the defaults; unknown keys are rejected so typos
/// surface. Throws ParseError / ConfigError.
RunConfig run_config_from_json(std::string_view text, const EnvLookup& env = process_env);
RunConfig load_run_config(const std::filesystem::path& path, const EnvLookup& env = process_env);
std::string run_config_to_json(const RunConfig& config);

// ---------------------------------------------------------------------------
// Backend construction

/// "openai" -> HttpChatBackend, "factset" -> FactSetJudge, "none" -> nullptr.
std::shared_ptr<ChatBackend> make_chat_backend(const BackendConfig& config);

/// Builds the generator for one ground-truth graph. "http" and "openai" share
/// one HttpGenerationBackend; "factset" binds a FactSetGenerator to the graph.
using GeneratorFactory = std::function<std::shared_ptr<GenerationBackend>(const SceneGraph& gt)>;
GeneratorFactory make_generator_factory(const BackendConfig& config);

}  // namespace scenebench
