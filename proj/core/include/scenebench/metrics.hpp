#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "scenebench/image.hpp"
#include "scenebench/judge.hpp"
#include "scenebench/scene_graph.hpp"

namespace scenebench {

struct RelationVerdict {
  Edge edge;
  std::string chosen_relation;
  bool correct = false;

  bool operator==(const RelationVerdict&) const = default;
};

using ObjectVerdicts = std::map<ObjectId, bool>;

/// Per-sample judge verdicts and scores. Scores are fractions in [0, 1];
/// percentages only appear at the presentation layer.
struct EvaluationRecord {
  static constexpr int kSchemaVersion = 1;

  std::string sample_id;
  ObjectVerdicts object_verdicts;
  std::vector<RelationVerdict> relation_verdicts;
  double object_recall = 0.0;
  double relation_recall = 0.0;
  double sgscore = 0.0;
  double alpha = 0.5;
  int abstentions = 0;
  bool failed = false;
  std::string error;

  bool operator==(const EvaluationRecord&) const = default;
};

/// |V_pred ∩ V_gt| / |V_gt|. Throws DomainError on an empty V_gt and
/// StructuralError when a ground-truth object has no verdict.
double object_recall(const SceneGraph& gt, const ObjectVerdicts& verdicts);

/// (#correct verdicts) / |E_gt|, defined as 1.0 when the graph has no edges.
/// Throws StructuralError when the verdict count differs from |E_gt|.
double relation_recall(const SceneGraph& gt, std::span<const RelationVerdict> verdicts);

/// alpha * object_recall + (1 - alpha) * relation_recall.
/// Throws DomainError when any argument lies outside [0, 1].
double sgscore(double object_recall, double relation_recall, double alpha);

struct EvalParams {
  double alpha = 0.5;
  std::uint64_t seed = 0;
  std::vector<std::string> vocab;
  /// Maximum number of judge questions in flight for this sample.
  std::size_t parallelism = 1;
};

/// Asks the presence questions (descending "at least k" counts per category,
/// the first Yes crediting k instances, those with a correctly judged incident
/// edge first, then in id order) and one relation question per edge,
/// then fills in the verdicts and the three scores.
///
/// Backend failures do not throw: the record comes back with failed = true and
/// the error message, and must be excluded from aggregation.
EvaluationRecord evaluate_sample(std::string_view sample_id, const SceneGraph& gt,
                                 const ImageBlob& image, Judge& judge, const EvalParams& params);

/// Seed for the relation question of edge `edge_index` in `sample_id`.
std::uint64_t relation_question_seed(std::uint64_t run_seed, std::string_view sample_id,
                                     std::size_t edge_index);

std::string record_to_json(const EvaluationRecord& record);
/// Throws ParseError / StructuralError.
EvaluationRecord record_from_json(std::string_view line);

// ---------------------------------------------------------------------------
// Aggregation

struct GroupStats {
  std::size_t n = 0;
  std::optional<double> mean_or;
  std::optional<double> mean_rr;
  std::optional<double> mean_sg;
  std::optional<double> std_sg;

  bool operator==(const GroupStats&) const = default;
};

struct ReportConfig {
  double alpha = 0.5;
  double gamma = 0.0;
  std::uint64_t seed = 0;
  std::string model_name;

  bool operator==(const ReportConfig&) const = default;
};

struct RunReport {
  GroupStats overall;
  std::map<ComplexityLevel, GroupStats> levels;
  /// Level-2 scene category -> stats; only categories that occur.
  std::map<std::string, GroupStats> categories;
  std::size_t failed = 0;
  ReportConfig config;

  bool operator==(const RunReport&) const = default;
};

struct GraphInfo {
  const SceneGraph* graph = nullptr;
  std::optional<std::string> category;
};

/// Groups successful records by complexity level of their graph (at `gamma`)
/// and by level-2 category. Records are reduced in sample_id order so any
/// permutation of the input gives an identical report. Failed records are
/// counted but excluded. Throws StructuralError when a sample_id has no graph.
RunReport aggregate(std::span<const EvaluationRecord> records,
                    const std::map<std::string, GraphInfo>& graphs, const ReportConfig& config);

/// Fraction as a percentage rounded half-up to two decimals, e.g. "54.56".
std::string format_percent(double fraction);

std::string report_to_json(const RunReport& report);
/// Overall/Simple/Medium/Hard SGScore columns, one row.
std::string report_to_csv(const RunReport& report);
std::string report_to_table(const RunReport& report);

// ---------------------------------------------------------------------------
// Human study

/// argmax of sgscore over the four candidates, lowest index on ties.
int machine_choice(std::span<const EvaluationRecord, 4> candidates);
int machine_choice(std::span<const double, 4> scores);

struct ConfusionMatrix {
  /// cells[human][machine]
  std::array<std::array<std::int64_t, 4>, 4> cells{};
  std::array<std::string, 4> labels;

  std::int64_t total() const;
  bool operator==(const ConfusionMatrix&) const = default;
};

struct ChoicePair {
  int human = 0;
  int machine = 0;
};

/// Throws StructuralError for a choice outside 0..3.
ConfusionMatrix confusion_matrix(std::span<const ChoicePair> responses,
                                 std::array<std::string, 4> labels = {});

}  // namespace scenebench
