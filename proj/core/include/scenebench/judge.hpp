#pragma once

#include <atomic>
#include <chrono>
#include <memory>
#include <optional>
#include <string>
#include <string_view>

#include "scenebench/answer_cache.hpp"
#include "scenebench/chat_backend.hpp"
#include "scenebench/questions.hpp"
#include "scenebench/scene_graph.hpp"

namespace scenebench {

struct JudgeAnswer {
  enum class Kind { YesNo, Choice };

  Kind kind = Kind::YesNo;
  std::optional<bool> yes;
  std::optional<int> choice_index;
  std::string raw_reply;
  /// Reply stayed unparseable after the clarifying re-ask; counted as No or
  /// as "no visible relationship".
  bool abstained = false;

  bool operator==(const JudgeAnswer&) const = default;
};

/// First "yes"/"no" word in the reply, case-insensitive.
std::optional<bool> parse_presence_reply(std::string_view reply);

/// Leading option letter ("A", "b)", "(C)", "D.") or a choice quoted verbatim.
std::optional<int> parse_relation_reply(std::string_view reply, const RelationQuestion& q);

struct RetryPolicy {
  int max_retries = 3;
  std::chrono::milliseconds initial_backoff{250};
};

/// Decorator retrying transient BackendErrors with exponential backoff; used
/// for annotator and composer backends, which do not go through a Judge.
class RetryingChatBackend final : public ChatBackend {
 public:
  RetryingChatBackend(std::shared_ptr<ChatBackend> inner, RetryPolicy retry);
  std::string model_name() const override { return inner_->model_name(); }
  /// Throws a non-transient BackendError once retries are exhausted.
  std::string complete(const ChatRequest& request) override;

 private:
  std::shared_ptr<ChatBackend> inner_;
  RetryPolicy retry_;
};

/// f_M: asks questions about an image through a ChatBackend, with retries on
/// transient failures, one clarifying re-ask on unparseable replies, and an
/// optional persistent answer cache.
class Judge {
 public:
  Judge(std::shared_ptr<ChatBackend> backend, RetryPolicy retry = {},
        std::shared_ptr<AnswerCache> cache = nullptr);

  /// Throws BackendError once retries are exhausted.
  JudgeAnswer ask(const ImageBlob& image, const Question& question);

  const std::string& model_name() const noexcept { return model_name_; }
  std::size_t backend_calls() const noexcept { return backend_calls_.load(); }
  std::size_t cache_hits() const noexcept { return cache_hits_.load(); }

 private:
  std::string fetch(const ImageBlob& image, const std::string& prompt, const Question& question);

  std::shared_ptr<ChatBackend> backend_;
  RetryPolicy retry_;
  std::shared_ptr<AnswerCache> cache_;
  std::string model_name_;
  std::atomic<std::size_t> backend_calls_{0};
  std::atomic<std::size_t> cache_hits_{0};
};

/// Deterministic answer for `question` against a known world graph.
///
/// Presence: "Yes" iff the world holds at least required_count instances of
/// the category. Relation: the queried triple if the world holds it, else the
/// first offered choice that labels a world edge between the same two
/// instances, else "no visible relationship". Instances are matched by id, so
/// an edge whose endpoint is absent from the world is never credited.
std::string oracle_reply(const SceneGraph& world, const Question& question);

/// Offline judge backend that answers every question from `world`.
std::shared_ptr<ChatBackend> scripted_oracle(SceneGraph world);

}  // namespace scenebench
