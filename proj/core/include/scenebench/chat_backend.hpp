#pragma once

#include <string>

#include "scenebench/image.hpp"
#include "scenebench/questions.hpp"

namespace scenebench {

/// One prompt to a (multimodal) chat model. `image` and `question` are optional;
/// `question` carries the structured form of a judge prompt so that offline
/// backends can answer without parsing text.
struct ChatRequest {
  std::string prompt;
  const ImageBlob* image = nullptr;
  const Question* question = nullptr;
};

/// The M-LLM seam used by the judge, the scene composer and the annotator.
/// Implementations must be safe to call from several threads at once.
/// Failures are reported as BackendError.
class ChatBackend {
 public:
  virtual ~ChatBackend() = default;
  virtual std::string model_name() const = 0;
  virtual std::string complete(const ChatRequest& request) = 0;
};

}  // namespace scenebench
