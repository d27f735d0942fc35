#include "scenebench/http_chat_backend.hpp"

#include <cstdlib>

#include "http_util.hpp"

namespace scenebench {

using nlohmann::json;

void BackendConfig::validate() const {
  if (max_retries < 0) throw ConfigError("max_retries must be >= 0");
  if (timeout.count() <= 0) throw ConfigError("timeout must be > 0");
  if (render_capacity < 1) throw ConfigError("render_capacity must be >= 1");
}

namespace detail {

std::string read_api_key(const BackendConfig& config) {
  if (config.api_key_env.empty()) return {};
  const char* value = std::getenv(config.api_key_env.c_str());
  if (!value || !*value) {
    throw ConfigError("environment variable " + config.api_key_env + " (api_key_env) is not set");
  }
  return value;
}

json post_json(const BackendConfig& config, const std::string& endpoint, const json& body,
               const std::string& api_key) {
  SplitUrl url = split_url(config.base_url);
  httplib::Client client(url.origin);
  auto secs = std::chrono::duration_cast<std::chrono::seconds>(config.timeout);
  auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(config.timeout - secs);
  client.set_connection_timeout(secs.count(), usecs.count());
  client.set_read_timeout(secs.count(), usecs.count());
  client.set_write_timeout(secs.count(), usecs.count());

  httplib::Headers headers;
  if (!api_key.empty()) headers.emplace("Authorization", "Bearer " + api_key);

  auto res = client.Post(url.path + endpoint, headers, body.dump(), "application/json");
  if (!res) {
    throw BackendError("request to " + config.base_url + endpoint +
                           " failed: " + httplib::to_string(res.error()),
                       true);
  }
  if (res->status < 200 || res->status >= 300) {
    bool transient = res->status == 408 || res->status == 429 || res->status >= 500;
    throw BackendError("HTTP " + std::to_string(res->status) + " from " + config.base_url +
                           endpoint + ": " + res->body.substr(0, 200),
                       transient);
  }
  try {
    return json::parse(res->body);
  } catch (const json::parse_error& e) {
    throw BackendError("malformed JSON reply from " + config.base_url + endpoint + ": " + e.what(),
                       false);
  }
}

}  // namespace detail

HttpChatBackend::HttpChatBackend(BackendConfig config) : config_(std::move(config)) {
  config_.validate();
  detail::split_url(config_.base_url);
  if (config_.model_name.empty()) throw ConfigError("chat backend needs a model name");
  api_key_ = detail::read_api_key(config_);
}

std::string HttpChatBackend::complete(const ChatRequest& request) {
  json content = json::array();
  content.push_back({{"type", "text"}, {"text", request.prompt}});
  if (request.image && !request.image->empty()) {
    std::string mime(request.image->mime_type());
    if (mime == "application/octet-stream") mime = "image/png";
    content.push_back({{"type", "image_url"},
                       {"image_url",
                        {{"url", "data:" + mime + ";base64," + base64_encode(request.image->bytes())}}}});
  }
  json body = {{"model", config_.model_name},
               {"temperature", config_.temperature},
               {"messages", json::array({{{"role", "user"}, {"content", std::move(content)}}})}};

  json reply = detail::post_json(config_, "/chat/completions", body, api_key_);
  try {
    const json& message = reply.at("choices").at(0).at("message");
    const json& text = message.at("content");
    if (text.is_string()) return text.get<std::string>();
    if (text.is_array()) {
      std::string joined;
      for (const auto& part : text) {
        if (part.value("type", "") == "text") joined += part.value("text", "");
      }
      return joined;
    }
  } catch (const json::exception&) {
  }
  throw BackendError("chat completion reply has no choices[0].message.content", false);
}

}  // namespace scenebench
