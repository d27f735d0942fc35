#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "scenebench/chat_backend.hpp"
#include "scenebench/generation.hpp"
#include "scenebench/judge.hpp"
#include "scenebench/metrics.hpp"

namespace scenebench {

struct NodeProvenance {
  bool missing_object = false;
  bool endpoint_of_failed_edge = false;
};

struct EdgeProvenance {
  bool failed_relation = false;
  bool incident_to_missing_object = false;
};

/// G_miss: facts the judge found absent or wrong, as a subgraph of the ground
/// truth. Edges are the wrongly judged edges plus every edge touching a
/// missing object; nodes are the missing objects plus all endpoints of those
/// edges.
struct MissingGraph {
  SceneGraph graph;
  std::map<ObjectId, NodeProvenance> nodes;
  /// Parallel to graph.edges().
  std::vector<EdgeProvenance> edges;

  bool empty() const { return graph.empty(); }
};

/// Throws StructuralError when the record was not computed against `gt`.
MissingGraph build_missing_graph(const SceneGraph& gt, const EvaluationRecord& record);

inline constexpr std::string_view kCompositionInstruction =
    "Rewrite these facts as one coherent photographic scene description, preserving every object "
    "and relationship: ";

/// "A realistic photo of <triplets>."
std::string fallback_scene_prompt(const SceneGraph& g);

struct ComposeResult {
  std::string prompt;
  std::optional<std::string> warning;
};

/// With a composer, sends the instruction plus the triplet serialization and
/// returns the reply; without one (or when it fails or replies with nothing)
/// uses fallback_scene_prompt.
ComposeResult compose_scene_prompt(const SceneGraph& g, ChatBackend* composer);

struct FeedbackParams {
  double alpha = 0.5;
  double lambda0 = 0.5;
  double lambda1 = 0.5;
  int max_iterations = 1;
  std::uint64_t seed = 0;
  std::vector<std::string> vocab;
  ChatBackend* composer = nullptr;
  ImageSize size{512, 512};
  std::size_t parallelism = 1;
  /// Use this prompt instead of composing one (the "baseline" setting).
  std::optional<std::string> prompt_override;
};

struct FeedbackIteration {
  std::string prompt;
  ImageBlob image;
  /// Reference image I1 generated from the previous missing graph; empty at
  /// iteration 0.
  ImageBlob reference;
  std::string reference_prompt;
  EvaluationRecord record;
  MissingGraph missing;
};

struct FeedbackResult {
  std::vector<FeedbackIteration> iterations;
  /// Index into `iterations` of the best-SGScore image (ties go to the later one).
  std::optional<std::size_t> final_index;
  bool converged = false;
  bool failed = false;
  std::string error;
  std::vector<std::string> warnings;
  std::size_t generation_calls = 0;

  const FeedbackIteration* final_iteration() const {
    return final_index ? &iterations[*final_index] : nullptr;
  }
};

/// Generate, evaluate, and while facts are missing and budget remains:
/// generate a reference image from the missing graph and regenerate the main
/// image from the original prompt with [(previous, lambda0), (reference, lambda1)].
/// Generation or judge failures end the run with failed = true and the
/// iterations completed so far.
FeedbackResult run_feedback(std::string_view sample_id, const SceneGraph& gt, GenerationBackend& gen,
                            Judge& judge, const FeedbackParams& params);

}  // namespace scenebench
