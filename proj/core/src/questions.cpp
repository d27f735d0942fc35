#include "scenebench/questions.hpp"

#include <algorithm>
#include <set>
#include <vector>

#include "scenebench/errors.hpp"
#include "scenebench/rng.hpp"

namespace scenebench {

const std::string& prompt_of(const Question& q) {
  return std::visit([](const auto& v) -> const std::string& { return v.prompt_text; }, q);
}

PresenceQuestion build_presence_question(std::string_view category, int required_count) {
  if (required_count < 1) {
    throw DomainError("presence question needs required_count >= 1, got " +
                      std::to_string(required_count));
  }
  PresenceQuestion q;
  q.category = std::string(category);
  q.required_count = required_count;
  if (required_count == 1) {
    q.prompt_text = "Is there a " + q.category + " in the image? Answer Yes or No.";
  } else {
    q.prompt_text = "Are there at least " + std::to_string(required_count) + " " + q.category +
                    "(s) in the image? Answer Yes or No.";
  }
  return q;
}

RelationQuestion build_relation_question(const Edge& edge, std::span<const std::string> vocab,
                                         std::uint64_t seed) {
  const std::string truth = canonical_relation(edge.relation);
  std::set<std::string> unique;
  std::vector<std::string> pool;
  for (const auto& v : vocab) {
    std::string rel = canonical_relation(v);
    if (!unique.insert(rel).second) {
      throw DomainError("relation vocabulary contains duplicate entry '" + rel + "'");
    }
    if (rel != truth && rel != kNoVisibleRelationship && !rel.empty()) pool.push_back(rel);
  }
  if (pool.size() < 2) {
    throw DomainError("relation vocabulary has " + std::to_string(pool.size()) +
                      " candidate distractor(s) for '" + truth +
                      "'; extend the vocabulary to at least two other relations");
  }

  Rng rng(seed);
  // Partial Fisher-Yates: the first two slots become the distractors.
  for (std::size_t i = 0; i < 2; ++i) {
    auto j = i + static_cast<std::size_t>(rng.below(pool.size() - i));
    std::swap(pool[i], pool[j]);
  }
  std::array<std::string, 3> head = {truth, pool[0], pool[1]};
  shuffle(std::span<std::string>(head), rng);

  RelationQuestion q;
  q.edge = edge;
  q.edge.relation = truth;
  q.subject_category = edge.source.category();
  q.object_category = edge.target.category();
  for (std::size_t i = 0; i < 3; ++i) q.choices[i] = head[i];
  q.choices[3] = std::string(kNoVisibleRelationship);
  q.answer_index = static_cast<int>(std::find(head.begin(), head.end(), truth) - head.begin());

  q.prompt_text = "What is the relationship between the " + q.subject_category + " and the " +
                  q.object_category + " in the image? ";
  static constexpr char kLabels[] = {'A', 'B', 'C', 'D'};
  for (std::size_t i = 0; i < 4; ++i) {
    q.prompt_text += kLabels[i];
    q.prompt_text += ") ";
    q.prompt_text += q.choices[i];
    q.prompt_text += i < 3 ? "; " : ".";
  }
  return q;
}

std::span<const std::string> default_relation_vocabulary() {
  static const std::vector<std::string> kVocab = {
      "above",     "behind",  "beside",   "carrying", "eating",    "has",     "holding",
      "in",        "in front of", "looking at", "near", "next to", "on",      "playing with",
      "riding",    "sitting on", "standing on", "throwing", "under", "walking on", "wearing",
  };
  return kVocab;
}

}  // namespace scenebench
