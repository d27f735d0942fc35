#pragma once

#include <chrono>
#include <string>

namespace scenebench {

/// Connection settings shared by judge, composer, annotator and generation
/// backends. `kind` selects the implementation: "openai" (HTTP chat
/// completions), "http" (generation wire contract), "factset" (offline
/// simulation), or "none".
struct BackendConfig {
  std::string kind = "none";
  std::string base_url;
  std::string model_name;
  /// Name of the environment variable holding the bearer token; empty for none.
  std::string api_key_env;
  std::chrono::milliseconds timeout{60'000};
  int max_retries = 3;
  double temperature = 0.0;
  /// Only read by the "factset" generator: number of prompt phrases it renders.
  int render_capacity = 2;

  /// Throws ConfigError when max_retries < 0 or timeout <= 0.
  void validate() const;
};

}  // namespace scenebench
