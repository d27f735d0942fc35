#pragma once

#include <string>
#include <string_view>

#include <httplib.h>
#include <json.hpp>

#include "scenebench/backend_config.hpp"
#include "scenebench/errors.hpp"

namespace scenebench::detail {

struct SplitUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;    // prefix without trailing slash, may be empty
};

inline SplitUrl split_url(std::string_view url) {
  auto scheme_end = url.find("://");
  if (scheme_end == std::string_view::npos) {
    throw ConfigError("backend base_url must include a scheme: '" + std::string(url) + "'");
  }
  auto path_start = url.find('/', scheme_end + 3);
  SplitUrl out;
  out.origin = std::string(url.substr(0, path_start));
  if (path_start != std::string_view::npos) {
    out.path = std::string(url.substr(path_start));
    while (!out.path.empty() && out.path.back() == '/') out.path.pop_back();
  }
  return out;
}

std::string read_api_key(const BackendConfig& config);

/// POST a JSON body and return the parsed JSON reply. Connection failures,
/// 408/429 and 5xx are reported as transient BackendErrors.
nlohmann::json post_json(const BackendConfig& config, const std::string& endpoint,
                         const nlohmann::json& body, const std::string& api_key);

}  // namespace scenebench::detail
