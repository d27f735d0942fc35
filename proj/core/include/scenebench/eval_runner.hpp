#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <span>
#include <stop_token>
#include <string>
#include <vector>

#include "scenebench/dataset.hpp"
#include "scenebench/judge.hpp"
#include "scenebench/metrics.hpp"

namespace scenebench {

enum ExitCode : int { kExitOk = 0, kExitPartial = 2, kExitBackend = 3 };

struct EvalRunOptions {
  double alpha = 0.5;
  double gamma = 0.0;
  std::uint64_t seed = 0;
  std::vector<std::string> vocab;
  std::size_t concurrency = 1;
  std::size_t judge_parallelism = 1;
  /// Image of a sample: images_dir / image reference (or the sample id when the
  /// graph carries no reference).
  std::filesystem::path images_dir;
  /// records.jsonl, report.json and report.csv are written here.
  std::filesystem::path output_dir;
  /// Keep existing records and evaluate only samples without a successful one.
  bool resume = false;
  /// Checked before each sample starts; samples already running finish.
  std::stop_token stop;
  /// Called (serialized) after each record is persisted.
  std::function<void(const EvaluationRecord&)> on_record;
};

struct EvalRunResult {
  RunReport report;
  std::size_t evaluated = 0;
  std::size_t reused = 0;
  std::size_t failed = 0;
  bool interrupted = false;

  int exit_code() const { return failed || interrupted ? kExitPartial : kExitOk; }
};

/// Evaluates every entry, appending each record to records.jsonl as soon as it
/// is scored, then writes report.json and report.csv over the latest record of
/// each sample. A resumed run reuses the successful records already on disk,
/// so (run, interrupt, resume) and an uninterrupted run write identical reports.
EvalRunResult run_eval(std::span<const DatasetEntry> entries, Judge& judge, const EvalRunOptions& options);

/// Latest record per sample id from a records file; a torn final line is
/// ignored. Returns an empty map when the file does not exist.
std::map<std::string, EvaluationRecord> load_records(const std::filesystem::path& path);

/// Aggregates a records file against a dataset and writes report.json and
/// report.csv next to it.
RunReport write_report(const std::map<std::string, EvaluationRecord>& records,
                       std::span<const DatasetEntry> entries, const ReportConfig& config,
                       const std::filesystem::path& output_dir);

}  // namespace scenebench
