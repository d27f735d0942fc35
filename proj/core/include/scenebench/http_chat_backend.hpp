#pragma once

#include <string>

#include "scenebench/backend_config.hpp"
#include "scenebench/chat_backend.hpp"

namespace scenebench {

/// Chat-completions client: POST {base_url}/chat/completions with a text part
/// and, when present, a base64 data-URL image part. The reply is the first
/// choice's message content.
class HttpChatBackend final : public ChatBackend {
 public:
  /// Throws ConfigError when the URL is unusable or the key variable is unset.
  explicit HttpChatBackend(BackendConfig config);

  std::string model_name() const override { return config_.model_name; }
  std::string complete(const ChatRequest& request) override;

 private:
  BackendConfig config_;
  std::string api_key_;
};

}  // namespace scenebench
