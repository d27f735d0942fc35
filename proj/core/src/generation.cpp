#include "scenebench/generation.hpp"

#include <atomic>
#include <thread>

#include "http_util.hpp"
#include "scenebench/rng.hpp"

namespace scenebench {

using nlohmann::json;

void GenerationRequest::validate() const {
  if (references.size() > 2) {
    throw DomainError("generation request carries " + std::to_string(references.size()) +
                      " references; at most 2 are allowed");
  }
  for (const auto& r : references) {
    if (!(r.weight >= 0.0)) throw DomainError("reference weights must be non-negative");
  }
  if (size.width <= 0 || size.height <= 0) throw DomainError("generation size must be positive");
}

std::string generation_request_to_json(const GenerationRequest& request) {
  json refs = json::array();
  for (const auto& r : request.references) {
    refs.push_back({{"image_b64", base64_encode(r.image.bytes())}, {"weight", r.weight}});
  }
  json body = {{"prompt", request.prompt},
               {"seed", request.seed},
               {"width", request.size.width},
               {"height", request.size.height},
               {"references", std::move(refs)}};
  return body.dump();
}

GenerationRequest generation_request_from_json(std::string_view body) {
  json doc;
  try {
    doc = json::parse(body.begin(), body.end());
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("malformed generation request: ") + e.what(), e.byte);
  }
  try {
    GenerationRequest req;
    req.prompt = doc.at("prompt").get<std::string>();
    req.seed = doc.value("seed", std::uint64_t{0});
    req.size = ImageSize{doc.value("width", 512), doc.value("height", 512)};
    if (auto it = doc.find("references"); it != doc.end()) {
      for (const auto& r : *it) {
        req.references.push_back(WeightedReference{
            ImageBlob(base64_decode(r.at("image_b64").get<std::string>())), r.at("weight").get<double>()});
      }
    }
    req.validate();
    return req;
  } catch (const json::exception& e) {
    throw StructuralError(std::string("generation request: ") + e.what());
  }
}

// ---------------------------------------------------------------------------

HttpGenerationBackend::HttpGenerationBackend(BackendConfig config) : config_(std::move(config)) {
  config_.validate();
  detail::split_url(config_.base_url);
  api_key_ = detail::read_api_key(config_);
}

ImageBlob HttpGenerationBackend::generate(const GenerationRequest& request) {
  request.validate();
  json body = json::parse(generation_request_to_json(request));
  std::chrono::milliseconds backoff{250};
  for (int attempt = 0;; ++attempt) {
    try {
      json reply = detail::post_json(config_, "/generate", body, api_key_);
      auto it = reply.find("image_b64");
      if (it == reply.end() || !it->is_string()) {
        throw BackendError("generation reply lacks \"image_b64\"", false);
      }
      ImageBlob image(base64_decode(it->get<std::string>()));
      if (image.empty()) throw BackendError("generation backend returned an empty image", false);
      return image;
    } catch (const BackendError& e) {
      if (!e.transient() || attempt >= config_.max_retries) throw;
    } catch (const StructuralError& e) {
      throw BackendError(std::string("generation reply: ") + e.what(), false);
    }
    std::this_thread::sleep_for(backoff);
    backoff *= 2;
  }
}

// ---------------------------------------------------------------------------

Bytes render_placeholder_png(const GenerationRequest& request) {
  const int w = 8, h = 8;
  Rng rng(fnv1a64(request.prompt) ^ request.seed);
  std::uint8_t rgb[3] = {static_cast<std::uint8_t>(rng.below(256)), static_cast<std::uint8_t>(rng.below(256)),
                         static_cast<std::uint8_t>(rng.below(256))};
  Bytes pixels(static_cast<std::size_t>(w * h * 3));
  for (std::size_t i = 0; i < pixels.size(); ++i) pixels[i] = rgb[i % 3];
  std::string weights;
  for (const auto& r : request.references) {
    if (!weights.empty()) weights += ",";
    weights += std::to_string(r.weight);
  }
  std::pair<std::string, std::string> text[] = {{"prompt", request.prompt}, {"reference_weights", weights}};
  return encode_png(w, h, pixels, text);
}

struct GenerationStubServer::Impl {
  httplib::Server server;
  Renderer render;
  std::thread thread;
  std::atomic<std::size_t> served{0};
};

GenerationStubServer::GenerationStubServer(Renderer render) : impl_(std::make_unique<Impl>()) {
  impl_->render = render ? std::move(render) : Renderer(render_placeholder_png);
  impl_->server.Post("/generate", [impl = impl_.get()](const httplib::Request& req, httplib::Response& res) {
    try {
      GenerationRequest parsed = generation_request_from_json(req.body);
      Bytes image = impl->render(parsed);
      ++impl->served;
      res.set_content(json{{"image_b64", base64_encode(image)}}.dump(), "application/json");
    } catch (const std::exception& e) {
      res.status = 400;
      res.set_content(json{{"error", e.what()}}.dump(), "application/json");
    }
  });
}

GenerationStubServer::~GenerationStubServer() { stop(); }

int GenerationStubServer::start(const std::string& host, int port) {
  int bound = port == 0 ? impl_->server.bind_to_any_port(host) : port;
  if (port != 0 && !impl_->server.bind_to_port(host, port)) bound = -1;
  if (bound < 0) throw Error("generation stub cannot bind " + host + ":" + std::to_string(port));
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return bound;
}

void GenerationStubServer::listen_blocking(const std::string& host, int port) {
  if (!impl_->server.listen(host, port)) {
    throw Error("generation stub cannot listen on " + host + ":" + std::to_string(port));
  }
}

void GenerationStubServer::stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

std::size_t GenerationStubServer::requests_served() const { return impl_->served.load(); }

}  // namespace scenebench
