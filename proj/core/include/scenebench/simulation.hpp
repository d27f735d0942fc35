#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "scenebench/chat_backend.hpp"
#include "scenebench/generation.hpp"
#include "scenebench/scene_graph.hpp"

namespace scenebench {

// Offline stand-ins for f_D and f_M. A "fact-set image" is the annotation JSON
// of the scene graph it depicts, so a judge can read the facts back exactly.

ImageBlob encode_fact_image(const SceneGraph& facts);
/// nullopt when the bytes are not a scene-graph document.
std::optional<SceneGraph> decode_fact_image(const ImageBlob& image);

/// Prompt phrases of a triplet prompt, with the "A realistic photo of" framing
/// and the final period stripped.
std::vector<std::string> prompt_phrases(std::string_view prompt);

/// Mock generator bound to one ground-truth graph. Renders the facts named by
/// the first `capacity` phrases of the prompt (a triplet phrase brings its
/// matching ground-truth edges and endpoints, a bare category its instances)
/// and unions in the facts of every reference image with positive weight.
class FactSetGenerator final : public GenerationBackend {
 public:
  FactSetGenerator(SceneGraph ground_truth, int capacity);
  ImageBlob generate(const GenerationRequest& request) override;

 private:
  SceneGraph gt_;
  int capacity_;
};

/// Judge backend that decodes the image as a fact set and answers with
/// oracle_reply. Images that do not decode are treated as empty worlds.
class FactSetJudge final : public ChatBackend {
 public:
  std::string model_name() const override { return "factset-oracle"; }
  std::string complete(const ChatRequest& request) override;
};

}  // namespace scenebench
