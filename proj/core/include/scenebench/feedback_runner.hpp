#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "scenebench/config.hpp"
#include "scenebench/dataset.hpp"
#include "scenebench/eval_runner.hpp"
#include "scenebench/feedback.hpp"

namespace scenebench {

struct FeedbackRunOptions {
  double alpha = 0.5;
  double gamma = 0.0;
  double lambda0 = 0.5;
  double lambda1 = 0.5;
  int max_iterations = 1;
  std::uint64_t seed = 0;
  std::vector<std::string> vocab;
  std::size_t concurrency = 1;
  std::size_t judge_parallelism = 1;
  /// Subset of "baseline", "composition", "feedback", run in that order.
  std::vector<std::string> settings = {"baseline", "composition", "feedback"};
  ChatBackend* composer = nullptr;
  ImageSize size{512, 512};
  /// Per-setting records and final images go under output_dir/<setting>/;
  /// the combined report.json / report.csv go in output_dir.
  std::filesystem::path output_dir;
  bool save_images = true;
};

struct SettingReport {
  std::string setting;
  RunReport report;
  std::size_t generation_calls = 0;
  std::vector<std::string> warnings;
};

struct FeedbackRunResult {
  std::vector<SettingReport> rows;
  std::size_t failed = 0;

  int exit_code() const { return failed ? kExitPartial : kExitOk; }
};

/// Ablation over prompt settings:
///   baseline     the bare triplet serialization, one generation;
///   composition  the composed scene prompt, one generation;
///   feedback     the composed prompt refined by the feedback loop.
/// Each setting scores the final image of every sample.
FeedbackRunResult run_feedback_settings(std::span<const DatasetEntry> entries, const GeneratorFactory& generators,
                                        Judge& judge, const FeedbackRunOptions& options);

std::string feedback_report_to_json(const FeedbackRunResult& result);
/// setting,n,object_recall,relation_recall,sgscore (percentages)
std::string feedback_report_to_csv(const FeedbackRunResult& result);
std::string feedback_report_to_table(const FeedbackRunResult& result);

}  // namespace scenebench
