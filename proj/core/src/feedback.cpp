#include "scenebench/feedback.hpp"

#include <algorithm>
#include <cctype>
#include <set>

#include "scenebench/errors.hpp"
#include "scenebench/rng.hpp"

namespace scenebench {

MissingGraph build_missing_graph(const SceneGraph& gt, const EvaluationRecord& record) {
  if (record.failed) {
    throw StructuralError("record " + record.sample_id + " failed; no verdicts to build from");
  }
  if (record.object_verdicts.size() != gt.num_objects()) {
    throw StructuralError("record " + record.sample_id + " has " +
                          std::to_string(record.object_verdicts.size()) + " object verdicts for " +
                          std::to_string(gt.num_objects()) + " objects");
  }
  if (record.relation_verdicts.size() != gt.num_edges()) {
    throw StructuralError("record " + record.sample_id + " has " +
                          std::to_string(record.relation_verdicts.size()) + " relation verdicts for " +
                          std::to_string(gt.num_edges()) + " edges");
  }

  std::set<ObjectId> missing;
  for (const auto& [id, box] : gt.objects()) {
    auto it = record.object_verdicts.find(id);
    if (it == record.object_verdicts.end()) {
      throw StructuralError("record " + record.sample_id + " has no verdict for " + id.raw());
    }
    if (!it->second) missing.insert(id);
  }

  MissingGraph out;
  std::vector<Edge> edges;
  for (std::size_t i = 0; i < gt.num_edges(); ++i) {
    const Edge& e = gt.edges()[i];
    if (!(record.relation_verdicts[i].edge == e)) {
      throw StructuralError("record " + record.sample_id + ": relation verdict " + std::to_string(i) +
                            " does not match the graph's edge");
    }
    EdgeProvenance p{!record.relation_verdicts[i].correct,
                     missing.contains(e.source) || missing.contains(e.target)};
    if (!p.failed_relation && !p.incident_to_missing_object) continue;
    edges.push_back(e);
    out.edges.push_back(p);
    out.nodes[e.source].endpoint_of_failed_edge = true;
    out.nodes[e.target].endpoint_of_failed_edge = true;
  }
  for (const auto& id : missing) out.nodes[id].missing_object = true;

  SceneGraph::ObjectMap objects;
  for (const auto& [id, prov] : out.nodes) objects.emplace(id, gt.objects().at(id));
  out.graph = SceneGraph(std::move(objects), std::move(edges), gt.image_ref(), gt.image_wh());
  return out;
}

std::string fallback_scene_prompt(const SceneGraph& g) {
  return "A realistic photo of " + serialize_triplets(g) + ".";
}

ComposeResult compose_scene_prompt(const SceneGraph& g, ChatBackend* composer) {
  if (!composer) return {fallback_scene_prompt(g), std::nullopt};
  try {
    std::string reply = composer->complete(
        ChatRequest{std::string(kCompositionInstruction) + serialize_triplets(g), nullptr, nullptr});
    auto first = std::find_if_not(reply.begin(), reply.end(), [](unsigned char c) { return std::isspace(c); });
    auto last = std::find_if_not(reply.rbegin(), reply.rend(), [](unsigned char c) { return std::isspace(c); });
    if (first == reply.end()) {
      return {fallback_scene_prompt(g), "scene composer returned an empty reply; using template prompt"};
    }
    return {std::string(first, last.base()), std::nullopt};
  } catch (const BackendError& e) {
    return {fallback_scene_prompt(g), std::string("scene composer failed (") + e.what() +
                                          "); using template prompt"};
  }
}

FeedbackResult run_feedback(std::string_view sample_id, const SceneGraph& gt, GenerationBackend& gen,
                            Judge& judge, const FeedbackParams& params) {
  if (params.max_iterations < 0) throw DomainError("max_iterations must be >= 0");

  FeedbackResult result;
  const EvalParams eval{params.alpha, params.seed, params.vocab, params.parallelism};

  std::string prompt;
  if (params.prompt_override) {
    prompt = *params.prompt_override;
  } else {
    auto composed = compose_scene_prompt(gt, params.composer);
    prompt = std::move(composed.prompt);
    if (composed.warning) result.warnings.push_back(*composed.warning);
  }

  auto generate = [&](GenerationRequest request) -> std::optional<ImageBlob> {
    try {
      ++result.generation_calls;
      ImageBlob image = gen.generate(request);
      if (image.empty()) throw BackendError("generation backend returned an empty image", false);
      return image;
    } catch (const std::exception& e) {
      result.failed = true;
      result.error = std::string("generation failed: ") + e.what();
      return std::nullopt;
    }
  };
  // Returns false when the judge could not score the image.
  auto score = [&](FeedbackIteration& it) {
    it.record = evaluate_sample(sample_id, gt, it.image, judge, eval);
    if (it.record.failed) {
      result.failed = true;
      result.error = "evaluation failed: " + it.record.error;
      return false;
    }
    it.missing = build_missing_graph(gt, it.record);
    return true;
  };

  {
    auto image = generate(GenerationRequest{prompt, {}, params.seed, params.size});
    if (!image) return result;
    FeedbackIteration first;
    first.prompt = prompt;
    first.image = std::move(*image);
    if (!score(first)) return result;
    result.iterations.push_back(std::move(first));
  }

  for (int round = 1; round <= params.max_iterations && !result.iterations.back().missing.empty(); ++round) {
    const FeedbackIteration& previous = result.iterations.back();
    FeedbackIteration next;
    next.prompt = prompt;

    auto composed = compose_scene_prompt(previous.missing.graph, params.composer);
    if (composed.warning) result.warnings.push_back(*composed.warning);
    next.reference_prompt = std::move(composed.prompt);
    auto reference = generate(GenerationRequest{next.reference_prompt, {},
                                                derive_seed(params.seed, "reference", static_cast<std::uint64_t>(round)),
                                                params.size});
    if (!reference) break;
    next.reference = std::move(*reference);

    auto image = generate(GenerationRequest{
        prompt, {{previous.image, params.lambda0}, {next.reference, params.lambda1}}, params.seed, params.size});
    if (!image) break;
    next.image = std::move(*image);
    if (!score(next)) break;
    result.iterations.push_back(std::move(next));
  }

  if (!result.iterations.empty()) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < result.iterations.size(); ++i) {
      if (result.iterations[i].record.sgscore >= result.iterations[best].record.sgscore) best = i;
    }
    result.final_index = best;
    result.converged = result.iterations.back().missing.empty();
  }
  return result;
}

}  // namespace scenebench
