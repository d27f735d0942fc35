#include <doctest.h>

#include <mutex>

#include "fixtures.hpp"
#include "graph_gen.hpp"
#include "oracles.hpp"
#include "scenebench/errors.hpp"
#include "scenebench/feedback.hpp"
#include "scenebench/simulation.hpp"

using namespace scenebench;

namespace {

/// Records every request before delegating.
class RecordingGenerator final : public GenerationBackend {
 public:
  explicit RecordingGenerator(GenerationBackend& inner) : inner_(inner) {}
  ImageBlob generate(const GenerationRequest& request) override {
    std::lock_guard lock(mutex_);
    requests.push_back(request);
    return inner_.generate(request);
  }
  std::vector<GenerationRequest> requests;

 private:
  GenerationBackend& inner_;
  std::mutex mutex_;
};

class FailingGenerator final : public GenerationBackend {
 public:
  ImageBlob generate(const GenerationRequest&) override { throw BackendError("render farm down", false); }
};

std::vector<std::string> vocab() {
  auto v = default_relation_vocabulary();
  return {v.begin(), v.end()};
}

}  // namespace

TEST_CASE("missing graph of a record with one missing object") {
  auto g = testing::example_graph();
  auto rec = testing::record_with_verdicts(g, {"sports ball.1"}, {false, true});
  auto miss = build_missing_graph(g, rec);
  CHECK(miss.graph.num_edges() == 1);
  CHECK(miss.graph.num_objects() == 2);
  CHECK(miss.nodes.at(ObjectId::parse("sports ball.1")).missing_object);
  CHECK(miss.nodes.at(ObjectId::parse("person.2")).endpoint_of_failed_edge);
  CHECK_FALSE(miss.nodes.at(ObjectId::parse("person.2")).missing_object);
  CHECK(miss.edges[0].incident_to_missing_object);
  CHECK(miss.edges[0].failed_relation);
}

TEST_CASE("missing graph is empty for a perfect record and rejects mismatches") {
  auto g = testing::example_graph();
  CHECK(build_missing_graph(g, testing::record_with_verdicts(g, {}, {true, true})).empty());
  auto other = testing::chain_graph(3, 2);
  CHECK_THROWS_AS(build_missing_graph(g, testing::record_with_verdicts(other, {}, {true, true})), StructuralError);
  EvaluationRecord failed;
  failed.failed = true;
  CHECK_THROWS_AS(build_missing_graph(g, failed), StructuralError);
}

TEST_CASE("scene composition uses the composer or falls back") {
  auto g = testing::example_graph();
  CHECK(compose_scene_prompt(g, nullptr).prompt == "A realistic photo of person kicking sports ball, person near person.");

  testing::ScriptedBackend composer({"  A boy kicks a ball next to a friend.\n"});
  auto composed = compose_scene_prompt(g, &composer);
  CHECK(composed.prompt == "A boy kicks a ball next to a friend.");
  CHECK_FALSE(composed.warning);
  CHECK(composer.prompts()[0] == std::string(kCompositionInstruction) + serialize_triplets(g));

  testing::ScriptedBackend empty({"   "});
  auto fallback = compose_scene_prompt(g, &empty);
  CHECK(fallback.prompt == fallback_scene_prompt(g));
  CHECK(fallback.warning);

  testing::ScriptedBackend dead({"x"}, 1);
  CHECK(compose_scene_prompt(g, &dead).warning);
}

TEST_CASE("feedback loop converges under the fact-set simulation") {
  auto g = testing::example_graph();
  FactSetGenerator gen(g, 1);
  RecordingGenerator recorder(gen);
  Judge judge(std::make_shared<FactSetJudge>());
  FeedbackParams params;
  params.max_iterations = 5;
  params.vocab = vocab();
  auto result = run_feedback("ex", g, recorder, judge, params);
  REQUIRE_FALSE(result.failed);
  CHECK(result.converged);
  CHECK(result.final_iteration()->record.sgscore == 1.0);
  for (std::size_t i = 1; i < result.iterations.size(); ++i) {
    CHECK(result.iterations[i].record.sgscore >= result.iterations[i - 1].record.sgscore);
  }
  CHECK(result.generation_calls == 1 + 2 * (result.iterations.size() - 1));
  CHECK(recorder.requests.size() == result.generation_calls);
  CHECK(recorder.requests[0].references.empty());
  REQUIRE(recorder.requests.size() >= 3);
  CHECK(recorder.requests[1].references.empty());
  REQUIRE(recorder.requests[2].references.size() == 2);
  CHECK(recorder.requests[2].references[0].weight == 0.5);
  CHECK(recorder.requests[2].references[1].weight == 0.5);
  CHECK(recorder.requests[2].prompt == recorder.requests[0].prompt);
}

TEST_CASE("zero iterations is a single generation") {
  auto g = testing::example_graph();
  FactSetGenerator gen(g, 1);
  Judge judge(std::make_shared<FactSetJudge>());
  FeedbackParams params;
  params.max_iterations = 0;
  params.vocab = vocab();
  auto result = run_feedback("ex", g, gen, judge, params);
  CHECK(result.iterations.size() == 1);
  CHECK(result.generation_calls == 1);
  CHECK(*result.final_index == 0);
}

TEST_CASE("generation failure is reported, not thrown") {
  auto g = testing::example_graph();
  FailingGenerator gen;
  Judge judge(std::make_shared<FactSetJudge>());
  FeedbackParams params;
  params.vocab = vocab();
  auto result = run_feedback("ex", g, gen, judge, params);
  CHECK(result.failed);
  CHECK(result.iterations.empty());
  CHECK(result.final_iteration() == nullptr);
  CHECK(result.error.find("render farm down") != std::string::npos);
}

TEST_CASE("fact-set images round trip and generator honours weights") {
  auto g = testing::example_graph();
  CHECK(*decode_fact_image(encode_fact_image(g)) == g);
  CHECK_FALSE(decode_fact_image(ImageBlob::from_string("\x89PNG")));

  FactSetGenerator gen(g, 5);
  auto full = decode_fact_image(gen.generate(GenerationRequest{fallback_scene_prompt(g), {}, 0, {8, 8}}));
  CHECK(full->num_edges() == 2);
  auto ref = encode_fact_image(g);
  auto zero = decode_fact_image(gen.generate(GenerationRequest{"tree", {{ref, 0.0}}, 0, {8, 8}}));
  CHECK(zero->empty());
  CHECK_THROWS_AS(FactSetGenerator(g, 0), ConfigError);
}
