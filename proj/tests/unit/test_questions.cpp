#include <doctest.h>

#include <algorithm>
#include <set>

#include "scenebench/errors.hpp"
#include "scenebench/questions.hpp"

using namespace scenebench;

namespace {

Edge kicking() { return Edge{ObjectId::parse("person.2"), ObjectId::parse("sports ball.1"), "kicking"}; }

}  // namespace

TEST_CASE("presence questions phrase counts") {
  CHECK(build_presence_question("dog", 1).prompt_text == "Is there a dog in the image? Answer Yes or No.");
  CHECK(build_presence_question("person", 3).prompt_text ==
        "Are there at least 3 person(s) in the image? Answer Yes or No.");
  CHECK_THROWS_AS(build_presence_question("dog", 0), DomainError);
}

TEST_CASE("relation questions offer the truth, two distractors and no-relationship") {
  auto vocab = default_relation_vocabulary();
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    auto q = build_relation_question(kicking(), vocab, seed);
    CHECK(q.choices[3] == kNoVisibleRelationship);
    CHECK(q.choices[static_cast<std::size_t>(q.answer_index)] == "kicking");
    CHECK(q.answer_index < 3);
    std::set<std::string> distinct(q.choices.begin(), q.choices.end());
    CHECK(distinct.size() == 4);
    CHECK(q.prompt_text.find("What is the relationship between the person and the sports ball in the image?") == 0);
  }
}

TEST_CASE("relation questions are deterministic per seed and vary across seeds") {
  auto vocab = default_relation_vocabulary();
  auto a = build_relation_question(kicking(), vocab, 7);
  auto b = build_relation_question(kicking(), vocab, 7);
  CHECK(a.prompt_text == b.prompt_text);
  std::set<std::string> prompts;
  for (std::uint64_t seed = 0; seed < 30; ++seed) prompts.insert(build_relation_question(kicking(), vocab, seed).prompt_text);
  CHECK(prompts.size() > 5);
}

TEST_CASE("answer position is roughly uniform") {
  auto vocab = default_relation_vocabulary();
  int counts[3] = {0, 0, 0};
  for (std::uint64_t seed = 0; seed < 3000; ++seed) ++counts[build_relation_question(kicking(), vocab, seed).answer_index];
  for (int c : counts) CHECK(c > 850);
}

TEST_CASE("vocabulary problems are domain errors") {
  std::vector<std::string> tiny = {"kicking", "near"};
  CHECK_THROWS_AS(build_relation_question(kicking(), tiny, 1), DomainError);
  std::vector<std::string> dup = {"near", "near", "on", "under"};
  CHECK_THROWS_AS(build_relation_question(kicking(), dup, 1), DomainError);
  std::vector<std::string> with_none = {"near", "no visible relationship", "on"};
  auto q = build_relation_question(kicking(), with_none, 3);
  CHECK(std::count(q.choices.begin(), q.choices.end(), std::string(kNoVisibleRelationship)) == 1);
}
