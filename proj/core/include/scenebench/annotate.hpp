#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "scenebench/chat_backend.hpp"
#include "scenebench/image.hpp"
#include "scenebench/scene_graph.hpp"

namespace scenebench {

struct DetectionRecord {
  std::string image_ref;
  ImageSize image_wh;
  std::vector<DeclaredObject> objects;

  /// Throws StructuralError on duplicate ids or boxes outside the image.
  void validate() const;
};

/// The scene-graph annotation prompt with the object list and image size
/// filled in. Throws DomainError for a record without objects.
std::string build_annotation_prompt(const DetectionRecord& record);

/// The object list as it appears in the annotation prompt:
/// ['sports ball.1:[312, 360, 370, 417]', 'person.2:[116, 49, 309, 491]']
std::string format_object_list(std::span<const DeclaredObject> objects);

struct AnnotationCheck {
  SceneGraph graph;
  std::vector<std::string> warnings;
  /// No edge survived; the caller decides whether to retry or skip.
  bool empty_annotation = false;
};

/// Keeps only edges between declared objects, attaches the detector's boxes and
/// image metadata, and canonicalizes relations.
AnnotationCheck validate_annotation(const SceneGraph& reply_graph, const DetectionRecord& record);

/// Parses an M-LLM reply (tolerating ```json fences) against the record's
/// declared objects and validates it.
AnnotationCheck check_annotation_reply(std::string_view reply, const DetectionRecord& record);

// ---------------------------------------------------------------------------
// Scene diversity

enum class SceneTheme { PeopleCentric, NonPeopleCentric };

std::string_view to_string(SceneTheme theme);

struct DiversityLabel {
  SceneTheme level1 = SceneTheme::PeopleCentric;
  std::string level2;

  /// Normalizes spelling variants ("Work / Occupation", "non-people-centric")
  /// to the taxonomy's names. Throws TaxonomyError for an unknown name or a
  /// level-2 category that does not belong to the level-1 theme.
  static DiversityLabel make(std::string_view level1, std::string_view level2);
  bool operator==(const DiversityLabel&) const = default;
};

std::span<const std::string_view> level2_categories(SceneTheme theme);

/// Image id used in diversity prompts: the graph's image reference, or its
/// position in the batch when it has none.
std::string diversity_image_id(const SceneGraph& g, std::size_t position);

/// Throws DomainError for an empty batch.
std::string build_diversity_prompt(std::span<const SceneGraph> batch);

struct LabelResult {
  std::string image_id;
  std::string file_name;
  std::optional<DiversityLabel> label;
  std::string error;
};

/// One entry per dictionary in the reply. Throws ParseError / StructuralError
/// when the reply holds no JSON list.
std::vector<LabelResult> parse_diversity_reply(std::string_view reply);

// ---------------------------------------------------------------------------
// Vocabulary

struct VocabStats {
  std::map<std::string, std::size_t> relations;
  std::map<std::string, std::size_t> categories;

  bool operator==(const VocabStats&) const = default;
};

VocabStats compute_vocab_stats(std::span<const SceneGraph> dataset);

std::string vocab_stats_to_json(const VocabStats& stats);

/// Follows synonym chains to their terminal canonical form. Throws ConfigError
/// on a cycle (a -> b -> a). A self-mapping is a no-op.
std::map<std::string, std::string> resolve_synonyms(const std::map<std::string, std::string>& synonyms);

/// Reads a {variant: canonical} JSON object.
std::map<std::string, std::string> parse_synonym_map(std::string_view json_text);

struct FilterResult {
  std::vector<SceneGraph> dataset;
  /// Counts after synonym merging and before frequency filtering.
  VocabStats merged_stats;
  std::size_t edges_removed = 0;
};

/// Merges synonyms, recounts, then drops edges whose relation occurs fewer
/// than `min_freq` times. Object sets are never changed.
FilterResult filter_relations(std::span<const SceneGraph> dataset, std::size_t min_freq,
                              const std::map<std::string, std::string>& synonyms);

using LevelQuotas = std::map<ComplexityLevel, std::size_t>;

/// Uniform sample without replacement per complexity level. Returns dataset
/// indices ordered by level, then by seeded shuffle. Throws DomainError naming
/// the level and shortfall when a quota exceeds its population.
std::vector<std::size_t> balanced_sample(std::span<const SceneGraph> dataset, double gamma,
                                         const LevelQuotas& quotas, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Pipelines

struct AnnotatedImage {
  std::size_t record_index = 0;
  std::optional<SceneGraph> graph;
  std::vector<std::string> warnings;
  std::string skip_reason;
};

/// Loads image bytes for a detection record; returning an empty blob skips it.
using ImageLoader = std::function<ImageBlob(const DetectionRecord&)>;

/// Annotates every record, retrying an empty or unparseable reply once before
/// skipping. Results come back in record order regardless of `parallelism`.
std::vector<AnnotatedImage> annotate_records(std::span<const DetectionRecord> records, ChatBackend& backend,
                                             const ImageLoader& load_image, std::size_t parallelism);

/// Classifies graphs in batches of `batch_size`; returns one result per graph
/// in input order (error set when the reply omitted or mislabeled it).
std::vector<LabelResult> classify_scenes(std::span<const SceneGraph> graphs, ChatBackend& backend,
                                         std::size_t batch_size, std::size_t parallelism);

}  // namespace scenebench
