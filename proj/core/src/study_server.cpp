#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "scenebench/errors.hpp"
#include "scenebench/image.hpp"
#include "scenebench/study.hpp"

namespace scenebench {

using nlohmann::json;

namespace {

constexpr std::string_view kFallbackPage = R"(<!doctype html>
<html><head><meta charset="utf-8"><title>Scene study</title></head>
<body><p>The annotation UI is not installed. Start the server with a static directory
holding the built UI, or drive the JSON API under /api directly.</p></body></html>
)";

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

}  // namespace

struct StudyServer::Impl {
  httplib::Server server;
  std::shared_ptr<StudyState> state;
  std::thread thread;
};

StudyServer::StudyServer(std::shared_ptr<StudyState> state, std::filesystem::path static_dir)
    : impl_(std::make_unique<Impl>()) {
  impl_->state = std::move(state);
  auto* server = &impl_->server;
  StudyState* st = impl_->state.get();

  server->Get("/api/tasks/next", [st](const httplib::Request& req, httplib::Response& res) {
    std::string annotator = req.get_param_value("annotator");
    if (annotator.empty()) return send_json(res, 400, {{"error", "missing annotator parameter"}});
    res.set_content(st->next_task_json(annotator), "application/json");
  });

  server->Post("/api/responses", [st](const httplib::Request& req, httplib::Response& res) {
    json body;
    try {
      body = json::parse(req.body);
    } catch (const json::parse_error&) {
      return send_json(res, 400, {{"error", "body must be JSON"}});
    }
    if (!body.is_object() || !body.contains("task_id") || !body.contains("annotator_id") ||
        !body.contains("displayed_choice") || !body["displayed_choice"].is_number_integer() ||
        !body["annotator_id"].is_string() || body["annotator_id"].get<std::string>().empty()) {
      return send_json(res, 400, {{"error", "expected {task_id, annotator_id, displayed_choice}"}});
    }
    const json& tid = body["task_id"];
    std::string task_id = tid.is_string() ? tid.get<std::string>() : tid.dump();
    auto [status, response] =
        st->submit(task_id, body["annotator_id"].get<std::string>(), body["displayed_choice"].get<int>());
    switch (status) {
      case SubmitStatus::Accepted:
        return send_json(res, 201, {{"status", "recorded"}, {"task_id", task_id}});
      case SubmitStatus::Duplicate:
        return send_json(res, 409, {{"error", "response already recorded for this task and annotator"}});
      case SubmitStatus::UnknownTask:
        return send_json(res, 404, {{"error", "unknown task"}});
      case SubmitStatus::InvalidChoice:
        return send_json(res, 400, {{"error", "displayed_choice must lie in 0..3"}});
    }
  });

  server->Get("/api/export", [st](const httplib::Request&, httplib::Response& res) {
    res.set_content(st->export_json(), "application/json");
  });

  server->Get(R"(/api/images/([^/]+)/([^/]+))", [st](const httplib::Request& req, httplib::Response& res) {
    auto path = st->image_path(req.matches[1], req.matches[2]);
    if (!path) return send_json(res, 404, {{"error", "unknown image"}});
    try {
      ImageBlob image = read_image_file(*path);
      res.set_content(std::string(image.as_string()), std::string(image.mime_type()));
    } catch (const std::exception&) {
      send_json(res, 404, {{"error", "image file missing"}});
    }
  });

  if (!static_dir.empty()) {
    if (!server->set_mount_point("/", static_dir.string())) {
      throw ConfigError("static directory " + static_dir.string() + " does not exist");
    }
  } else {
    server->Get("/", [](const httplib::Request&, httplib::Response& res) {
      res.set_content(std::string(kFallbackPage), "text/html");
    });
  }
}

StudyServer::~StudyServer() { stop(); }

int StudyServer::start(const std::string& host, int port) {
  int bound = port == 0 ? impl_->server.bind_to_any_port(host) : port;
  if (port != 0 && !impl_->server.bind_to_port(host, port)) bound = -1;
  if (bound < 0) throw ConfigError("study server cannot bind " + host + ":" + std::to_string(port));
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return bound;
}

void StudyServer::listen_blocking(const std::string& host, int port) {
  if (!impl_->server.listen(host, port)) {
    throw ConfigError("study server cannot listen on " + host + ":" + std::to_string(port));
  }
}

void StudyServer::stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace scenebench
