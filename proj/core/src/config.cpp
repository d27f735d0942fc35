#include "scenebench/config.hpp"

#include <cmath>
#include <cstdlib>
#include <set>

#include <json.hpp>

#include "scenebench/dataset.hpp"
#include "scenebench/errors.hpp"
#include "scenebench/http_chat_backend.hpp"
#include "scenebench/simulation.hpp"

namespace scenebench {

using nlohmann::json;

namespace {

void check_unit(double v, const char* name) {
  if (!(v >= 0.0 && v <= 1.0)) throw ConfigError(std::string(name) + " must lie in [0, 1]");
}

void reject_unknown(const json& obj, std::initializer_list<std::string_view> known, std::string_view where) {
  for (const auto& [key, value] : obj.items()) {
    bool found = false;
    for (auto k : known) found = found || k == key;
    if (!found) throw ConfigError("unknown key \"" + key + "\" in " + std::string(where));
  }
}

template <typename T>
void read(const json& obj, const char* key, T& out) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return;
  try {
    out = it->get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config field \"") + key + "\": " + e.what());
  }
}

void read_path(const json& obj, const char* key, std::filesystem::path& out) {
  std::string s;
  read(obj, key, s);
  if (!s.empty()) out = s;
}

BackendConfig backend_from_json(const json& obj, std::string_view where) {
  if (!obj.is_object()) throw ConfigError(std::string(where) + " must be an object");
  reject_unknown(obj,
                 {"kind", "base_url", "model", "api_key_env", "timeout_ms", "max_retries", "temperature",
                  "render_capacity"},
                 where);
  BackendConfig c;
  read(obj, "kind", c.kind);
  read(obj, "base_url", c.base_url);
  read(obj, "model", c.model_name);
  read(obj, "api_key_env", c.api_key_env);
  std::int64_t timeout = c.timeout.count();
  read(obj, "timeout_ms", timeout);
  c.timeout = std::chrono::milliseconds(timeout);
  read(obj, "max_retries", c.max_retries);
  read(obj, "temperature", c.temperature);
  read(obj, "render_capacity", c.render_capacity);
  static const std::set<std::string> kinds = {"openai", "http", "factset", "none"};
  if (!kinds.contains(c.kind)) throw ConfigError(std::string(where) + ": unknown backend kind \"" + c.kind + "\"");
  c.validate();
  return c;
}

json backend_to_json(const BackendConfig& c) {
  return {{"kind", c.kind},
          {"base_url", c.base_url},
          {"model", c.model_name},
          {"api_key_env", c.api_key_env},
          {"timeout_ms", c.timeout.count()},
          {"max_retries", c.max_retries},
          {"temperature", c.temperature},
          {"render_capacity", c.render_capacity}};
}

}  // namespace

void RunConfig::validate() const {
  check_unit(alpha, "alpha");
  check_unit(gamma, "gamma");
  if (!(lambda0 >= 0.0) || !std::isfinite(lambda0)) throw ConfigError("lambda0 must be a finite value >= 0");
  if (!(lambda1 >= 0.0) || !std::isfinite(lambda1)) throw ConfigError("lambda1 must be a finite value >= 0");
  if (max_iterations < 0) throw ConfigError("max_iterations must be >= 0");
  if (concurrency < 1) throw ConfigError("concurrency must be >= 1");
  if (judge_parallelism < 1) throw ConfigError("judge_parallelism must be >= 1");
  if (classify_batch < 1) throw ConfigError("classify_batch must be >= 1");
  if (port < 0 || port > 65535) throw ConfigError("port must lie in [0, 65535]");
  static const std::set<std::string> known = {"baseline", "composition", "feedback"};
  for (const auto& s : settings) {
    if (!known.contains(s)) throw ConfigError("unknown feedback setting \"" + s + "\"");
  }
  for (const auto* b : {&judge, &generation, &composer, &annotator}) b->validate();
}

std::optional<std::string> process_env(const std::string& name) {
  const char* v = std::getenv(name.c_str());
  if (!v) return std::nullopt;
  return std::string(v);
}

std::string interpolate_env(std::string_view text, const EnvLookup& env) {
  std::string out;
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] != '$' || i + 1 >= text.size()) {
      out.push_back(text[i]);
      continue;
    }
    if (text[i + 1] == '$') {
      out.push_back('$');
      ++i;
      continue;
    }
    if (text[i + 1] != '{') {
      out.push_back('$');
      continue;
    }
    auto close = text.find('}', i + 2);
    if (close == std::string_view::npos) throw ConfigError("unterminated ${ in config");
    std::string name(text.substr(i + 2, close - i - 2));
    auto value = env(name);
    if (!value) throw ConfigError("config references unset environment variable " + name);
    out += *value;
    i = close;
  }
  return out;
}

RunConfig run_config_from_json(std::string_view text, const EnvLookup& env) {
  json doc;
  try {
    doc = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("malformed config: ") + e.what(), e.byte);
  }
  if (!doc.is_object()) throw ConfigError("config must be a JSON object");
  // Interpolate inside string values only, so a secret cannot alter structure.
  std::function<void(json&)> walk = [&](json& v) {
    if (v.is_string()) {
      v = interpolate_env(v.get<std::string>(), env);
    } else if (v.is_structured()) {
      for (auto& child : v) walk(child);
    }
  };
  walk(doc);

  reject_unknown(doc,
                 {"alpha", "gamma", "lambda0", "lambda1", "seed", "max_iterations", "concurrency",
                  "judge_parallelism", "judge", "generation", "composer", "annotator", "cache", "dataset",
                  "images_dir", "labels", "output_dir", "vocab", "settings", "min_freq", "synonyms", "quotas",
                  "classify_batch", "tasks", "static_dir", "host", "port"},
                 "config");
  RunConfig c;
  read(doc, "alpha", c.alpha);
  read(doc, "gamma", c.gamma);
  read(doc, "lambda0", c.lambda0);
  read(doc, "lambda1", c.lambda1);
  read(doc, "seed", c.seed);
  read(doc, "max_iterations", c.max_iterations);
  read(doc, "concurrency", c.concurrency);
  read(doc, "judge_parallelism", c.judge_parallelism);
  if (doc.contains("judge")) c.judge = backend_from_json(doc["judge"], "judge");
  if (doc.contains("generation")) c.generation = backend_from_json(doc["generation"], "generation");
  if (doc.contains("composer")) c.composer = backend_from_json(doc["composer"], "composer");
  if (doc.contains("annotator")) c.annotator = backend_from_json(doc["annotator"], "annotator");
  read_path(doc, "cache", c.cache);
  read_path(doc, "dataset", c.dataset);
  read_path(doc, "images_dir", c.images_dir);
  read_path(doc, "labels", c.labels);
  read_path(doc, "output_dir", c.output_dir);
  read(doc, "vocab", c.vocab);
  read(doc, "settings", c.settings);
  read(doc, "min_freq", c.min_freq);
  read_path(doc, "synonyms", c.synonyms);
  if (auto it = doc.find("quotas"); it != doc.end()) {
    if (!it->is_object()) throw ConfigError("quotas must map level names to counts");
    for (const auto& [level, count] : it->items()) {
      c.quotas[complexity_level_from_string(level)] = count.get<std::size_t>();
    }
  }
  read(doc, "classify_batch", c.classify_batch);
  read_path(doc, "tasks", c.tasks);
  read_path(doc, "static_dir", c.static_dir);
  read(doc, "host", c.host);
  read(doc, "port", c.port);
  c.validate();
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path, const EnvLookup& env) {
  try {
    return run_config_from_json(read_text_file(path), env);
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

std::string run_config_to_json(const RunConfig& c) {
  json quotas = json::object();
  for (const auto& [level, count] : c.quotas) quotas[std::string(to_string(level))] = count;
  json doc = {{"alpha", c.alpha},
              {"gamma", c.gamma},
              {"lambda0", c.lambda0},
              {"lambda1", c.lambda1},
              {"seed", c.seed},
              {"max_iterations", c.max_iterations},
              {"concurrency", c.concurrency},
              {"judge_parallelism", c.judge_parallelism},
              {"judge", backend_to_json(c.judge)},
              {"generation", backend_to_json(c.generation)},
              {"composer", backend_to_json(c.composer)},
              {"annotator", backend_to_json(c.annotator)},
              {"cache", c.cache.string()},
              {"dataset", c.dataset.string()},
              {"images_dir", c.images_dir.string()},
              {"labels", c.labels.string()},
              {"output_dir", c.output_dir.string()},
              {"vocab", c.vocab},
              {"settings", c.settings},
              {"min_freq", c.min_freq},
              {"synonyms", c.synonyms.string()},
              {"quotas", quotas},
              {"classify_batch", c.classify_batch},
              {"tasks", c.tasks.string()},
              {"static_dir", c.static_dir.string()},
              {"host", c.host},
              {"port", c.port}};
  return doc.dump(2) + "\n";
}

std::shared_ptr<ChatBackend> make_chat_backend(const BackendConfig& config) {
  if (config.kind == "openai") return std::make_shared<HttpChatBackend>(config);
  if (config.kind == "factset") return std::make_shared<FactSetJudge>();
  if (config.kind == "none") return nullptr;
  throw ConfigError("backend kind \"" + config.kind + "\" cannot answer chat requests");
}

GeneratorFactory make_generator_factory(const BackendConfig& config) {
  if (config.kind == "http" || config.kind == "openai") {
    auto shared = std::make_shared<HttpGenerationBackend>(config);
    return [shared](const SceneGraph&) { return shared; };
  }
  if (config.kind == "factset") {
    int capacity = config.render_capacity;
    return [capacity](const SceneGraph& gt) { return std::make_shared<FactSetGenerator>(gt, capacity); };
  }
  throw ConfigError("no generation backend configured (generation.kind is \"" + config.kind + "\")");
}

}  // namespace scenebench
