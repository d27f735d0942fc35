#include "scenebench/judge.hpp"

#include <algorithm>
#include <cctype>
#include <thread>

#include "scenebench/errors.hpp"

namespace scenebench {

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

bool is_word_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }

/// `needle` occurs in `hay` delimited by non-word characters on both sides.
bool contains_phrase(std::string_view hay, std::string_view needle) {
  if (needle.empty()) return false;
  for (auto pos = hay.find(needle); pos != std::string_view::npos; pos = hay.find(needle, pos + 1)) {
    bool left = pos == 0 || !is_word_char(hay[pos - 1]);
    auto end = pos + needle.size();
    bool right = end == hay.size() || !is_word_char(hay[end]);
    if (left && right) return true;
  }
  return false;
}

constexpr std::string_view kRelationClarifier = " Answer with a single letter.";
constexpr std::string_view kPresenceClarifier = " Answer with a single word: Yes or No.";

std::string choice_reply(const RelationQuestion& q, int index) {
  return std::string(1, static_cast<char>('A' + index)) + ") " + q.choices[static_cast<std::size_t>(index)];
}

class ScriptedOracle final : public ChatBackend {
 public:
  explicit ScriptedOracle(SceneGraph world) : world_(std::move(world)) {}

  std::string model_name() const override { return "scripted-oracle"; }

  std::string complete(const ChatRequest& request) override {
    if (!request.question) {
      throw BackendError("scripted oracle only answers structured judge questions", false);
    }
    return oracle_reply(world_, *request.question);
  }

 private:
  const SceneGraph world_;
};

}  // namespace

std::optional<bool> parse_presence_reply(std::string_view reply) {
  std::string text = lower(reply);
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && !is_word_char(text[i])) ++i;
    std::size_t start = i;
    while (i < text.size() && is_word_char(text[i])) ++i;
    std::string_view word(text.data() + start, i - start);
    if (word == "yes") return true;
    if (word == "no") return false;
  }
  return std::nullopt;
}

std::optional<int> parse_relation_reply(std::string_view reply, const RelationQuestion& q) {
  std::string text = lower(reply);
  std::size_t i = 0;
  while (i < text.size() && (std::isspace(static_cast<unsigned char>(text[i])) ||
                             text[i] == '*' || text[i] == '(' || text[i] == '[' || text[i] == '"' ||
                             text[i] == '\'')) {
    ++i;
  }
  if (i < text.size() && text[i] >= 'a' && text[i] <= 'd') {
    std::size_t next = i + 1;
    if (next == text.size() ||
        std::string_view(")].:,;*\"'\n").find(text[next]) != std::string_view::npos) {
      return text[i] - 'a';
    }
  }

  std::string_view body(text);
  body.remove_prefix(std::min(i, body.size()));
  while (!body.empty() && (std::isspace(static_cast<unsigned char>(body.back())) ||
                           std::string_view(".!\"'*").find(body.back()) != std::string_view::npos)) {
    body.remove_suffix(1);
  }
  for (int k = 0; k < 4; ++k) {
    if (body == q.choices[static_cast<std::size_t>(k)]) return k;
  }
  std::optional<int> found;
  for (int k = 0; k < 4; ++k) {
    if (contains_phrase(body, q.choices[static_cast<std::size_t>(k)])) {
      if (found) return std::nullopt;
      found = k;
    }
  }
  return found;
}

// ---------------------------------------------------------------------------

namespace {

template <typename Call>
std::string with_retries(const RetryPolicy& retry, Call&& call) {
  auto backoff = retry.initial_backoff;
  for (int attempt = 0;; ++attempt) {
    try {
      return call();
    } catch (const BackendError& e) {
      if (!e.transient() || attempt >= retry.max_retries) {
        throw BackendError(std::string(e.what()) + " (after " + std::to_string(attempt + 1) + " attempt(s))",
                           false);
      }
    }
    std::this_thread::sleep_for(backoff);
    backoff *= 2;
  }
}

}  // namespace

RetryingChatBackend::RetryingChatBackend(std::shared_ptr<ChatBackend> inner, RetryPolicy retry)
    : inner_(std::move(inner)), retry_(retry) {
  if (!inner_) throw ConfigError("retrying backend needs an inner backend");
  if (retry_.max_retries < 0) throw ConfigError("max_retries must be >= 0");
}

std::string RetryingChatBackend::complete(const ChatRequest& request) {
  return with_retries(retry_, [&] { return inner_->complete(request); });
}

Judge::Judge(std::shared_ptr<ChatBackend> backend, RetryPolicy retry,
             std::shared_ptr<AnswerCache> cache)
    : backend_(std::move(backend)), retry_(retry), cache_(std::move(cache)) {
  if (!backend_) throw ConfigError("judge needs a backend");
  if (retry_.max_retries < 0) throw ConfigError("max_retries must be >= 0");
  model_name_ = backend_->model_name();
}

std::string Judge::fetch(const ImageBlob& image, const std::string& prompt, const Question& question) {
  std::optional<CacheKey> key;
  if (cache_) {
    key = make_cache_key(image.digest(), prompt, model_name_);
    if (auto hit = cache_->get(*key)) {
      ++cache_hits_;
      return *hit;
    }
  }

  ChatRequest request{prompt, &image, &question};
  std::string reply = with_retries(retry_, [&] {
    ++backend_calls_;
    return backend_->complete(request);
  });
  if (cache_) cache_->put(*key, reply);
  return reply;
}

JudgeAnswer Judge::ask(const ImageBlob& image, const Question& question) {
  JudgeAnswer answer;
  const std::string& prompt = prompt_of(question);

  if (std::holds_alternative<PresenceQuestion>(question)) {
    answer.kind = JudgeAnswer::Kind::YesNo;
    answer.raw_reply = fetch(image, prompt, question);
    answer.yes = parse_presence_reply(answer.raw_reply);
    if (!answer.yes) {
      answer.raw_reply = fetch(image, prompt + std::string(kPresenceClarifier), question);
      answer.yes = parse_presence_reply(answer.raw_reply);
    }
    if (!answer.yes) {
      answer.yes = false;
      answer.abstained = true;
    }
    return answer;
  }

  const auto& rq = std::get<RelationQuestion>(question);
  answer.kind = JudgeAnswer::Kind::Choice;
  answer.raw_reply = fetch(image, prompt, question);
  answer.choice_index = parse_relation_reply(answer.raw_reply, rq);
  if (!answer.choice_index) {
    answer.raw_reply = fetch(image, prompt + std::string(kRelationClarifier), question);
    answer.choice_index = parse_relation_reply(answer.raw_reply, rq);
  }
  if (!answer.choice_index) {
    answer.choice_index = 3;
    answer.abstained = true;
  }
  return answer;
}

// ---------------------------------------------------------------------------

std::string oracle_reply(const SceneGraph& world, const Question& question) {
  if (const auto* pq = std::get_if<PresenceQuestion>(&question)) {
    return world.multiplicity(pq->category) >= pq->required_count ? "Yes" : "No";
  }
  const auto& rq = std::get<RelationQuestion>(question);
  auto world_has = [&](std::string_view relation) {
    return std::any_of(world.edges().begin(), world.edges().end(), [&](const Edge& e) {
      return e.source == rq.edge.source && e.target == rq.edge.target && e.relation == relation;
    });
  };
  if (world_has(rq.edge.relation)) return choice_reply(rq, rq.answer_index);
  for (int k = 0; k < 3; ++k) {
    if (world_has(rq.choices[static_cast<std::size_t>(k)])) return choice_reply(rq, k);
  }
  return choice_reply(rq, 3);
}

std::shared_ptr<ChatBackend> scripted_oracle(SceneGraph world) {
  return std::make_shared<ScriptedOracle>(std::move(world));
}

}  // namespace scenebench
