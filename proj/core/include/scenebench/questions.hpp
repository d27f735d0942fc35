#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <variant>

#include "scenebench/scene_graph.hpp"

namespace scenebench {

inline constexpr std::string_view kNoVisibleRelationship = "no visible relationship";

struct PresenceQuestion {
  std::string category;
  int required_count = 1;
  std::string prompt_text;
};

/// Four-way multiple choice. The last choice is always "no visible relationship".
struct RelationQuestion {
  Edge edge;
  std::string subject_category;
  std::string object_category;
  std::array<std::string, 4> choices;
  int answer_index = 0;
  std::string prompt_text;
};

using Question = std::variant<PresenceQuestion, RelationQuestion>;

const std::string& prompt_of(const Question& q);

/// "Is there a <category> in the image? Answer Yes or No." for a count of 1,
/// "Are there at least <k> <category>(s) in the image? Answer Yes or No." above.
/// Throws DomainError when required_count < 1.
PresenceQuestion build_presence_question(std::string_view category, int required_count);

/// Ground truth plus two distractors drawn from `vocab` without replacement,
/// shuffled with `seed`, then "no visible relationship" as option D.
/// Throws DomainError when vocab has duplicates or fewer than two non-ground-truth
/// entries.
RelationQuestion build_relation_question(const Edge& edge, std::span<const std::string> vocab,
                                         std::uint64_t seed);

/// A small, generic relation vocabulary used to pad run vocabularies so that
/// every edge can get two distractors.
std::span<const std::string> default_relation_vocabulary();

}  // namespace scenebench
