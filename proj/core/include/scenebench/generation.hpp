#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <thread>
#include <vector>

#include "scenebench/backend_config.hpp"
#include "scenebench/image.hpp"
#include "scenebench/scene_graph.hpp"

namespace scenebench {

struct WeightedReference {
  ImageBlob image;
  double weight = 0.0;
};

/// f_D input. `references` holds at most two entries, in order the initial
/// image (lambda0) and the reference image (lambda1).
struct GenerationRequest {
  std::string prompt;
  std::vector<WeightedReference> references;
  std::uint64_t seed = 0;
  ImageSize size{512, 512};

  /// Throws DomainError on more than two references or a negative weight.
  void validate() const;
};

/// Image generator seam. Implementations must be safe to call concurrently.
class GenerationBackend {
 public:
  virtual ~GenerationBackend() = default;
  virtual ImageBlob generate(const GenerationRequest& request) = 0;
};

/// JSON body of the generation wire contract:
/// {prompt, seed, width, height, references: [{image_b64, weight}]}.
std::string generation_request_to_json(const GenerationRequest& request);
/// Throws StructuralError / ParseError.
GenerationRequest generation_request_from_json(std::string_view body);

/// Client for the wire contract: POST {base_url}/generate -> {"image_b64": ...}.
/// Transient HTTP failures are retried with exponential backoff.
class HttpGenerationBackend final : public GenerationBackend {
 public:
  explicit HttpGenerationBackend(BackendConfig config);
  ImageBlob generate(const GenerationRequest& request) override;

 private:
  BackendConfig config_;
  std::string api_key_;
};

/// Conformance stub for the wire contract. Serves POST /generate on a
/// background thread and renders each request with `render`.
class GenerationStubServer {
 public:
  using Renderer = std::function<Bytes(const GenerationRequest&)>;

  explicit GenerationStubServer(Renderer render = {});
  ~GenerationStubServer();
  GenerationStubServer(const GenerationStubServer&) = delete;
  GenerationStubServer& operator=(const GenerationStubServer&) = delete;

  /// Binds host:port (0 picks a free port) and starts serving; returns the port.
  int start(const std::string& host = "127.0.0.1", int port = 0);
  /// Blocks serving on the calling thread.
  void listen_blocking(const std::string& host, int port);
  void stop();
  std::size_t requests_served() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Default stub renderer: a small solid-colour PNG whose colour derives from
/// the prompt, carrying the prompt and reference weights as tEXt chunks.
Bytes render_placeholder_png(const GenerationRequest& request);

}  // namespace scenebench
