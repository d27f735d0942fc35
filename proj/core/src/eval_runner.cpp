#include "scenebench/eval_runner.hpp"

#include <fstream>
#include <mutex>

#include "scenebench/errors.hpp"
#include "scenebench/image.hpp"
#include "scenebench/parallel.hpp"

namespace scenebench {

namespace {

constexpr std::string_view kRecordsFile = "records.jsonl";

std::filesystem::path image_path(const DatasetEntry& entry, const std::filesystem::path& images_dir) {
  return images_dir / entry.graph.image_ref().value_or(entry.sample_id);
}

}  // namespace

std::map<std::string, EvaluationRecord> load_records(const std::filesystem::path& path) {
  std::map<std::string, EvaluationRecord> out;
  if (!std::filesystem::exists(path)) return out;
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  std::string line;
  std::vector<std::string> lines;
  while (std::getline(in, line)) lines.push_back(line);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (lines[i].find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      EvaluationRecord r = record_from_json(lines[i]);
      out[r.sample_id] = std::move(r);
    } catch (const Error& e) {
      // Only the last line may be torn by an interrupted write.
      if (i + 1 == lines.size()) break;
      throw StructuralError(path.string() + ":" + std::to_string(i + 1) + ": " + e.what());
    }
  }
  return out;
}

RunReport write_report(const std::map<std::string, EvaluationRecord>& records, std::span<const DatasetEntry> entries,
                       const ReportConfig& config, const std::filesystem::path& output_dir) {
  auto graphs = graph_index(entries);
  std::vector<EvaluationRecord> selected;
  for (const auto& [id, record] : records) {
    if (graphs.contains(id)) selected.push_back(record);
  }
  RunReport report = aggregate(selected, graphs, config);
  write_text_file(output_dir / "report.json", report_to_json(report));
  write_text_file(output_dir / "report.csv", report_to_csv(report));
  return report;
}

EvalRunResult run_eval(std::span<const DatasetEntry> entries, Judge& judge, const EvalRunOptions& options) {
  std::filesystem::create_directories(options.output_dir);
  const auto records_path = options.output_dir / kRecordsFile;

  std::map<std::string, EvaluationRecord> records;
  if (options.resume) {
    records = load_records(records_path);
    // Rewrite without a torn tail so appends start on a fresh line.
    std::string text;
    for (const auto& [id, r] : records) text += record_to_json(r) + "\n";
    write_text_file(records_path, text);
  } else {
    write_text_file(records_path, "");
  }

  EvalRunResult result;
  std::vector<const DatasetEntry*> pending;
  for (const auto& entry : entries) {
    auto it = records.find(entry.sample_id);
    if (it != records.end() && !it->second.failed) {
      ++result.reused;
    } else {
      pending.push_back(&entry);
    }
  }

  std::ofstream log(records_path, std::ios::app | std::ios::binary);
  if (!log) throw ConfigError("cannot append to " + records_path.string());
  std::mutex mutex;
  const EvalParams params{options.alpha, options.seed, options.vocab, options.judge_parallelism};

  parallel_for(pending.size(), options.concurrency, [&](std::size_t i) {
    if (options.stop.stop_requested()) {
      std::lock_guard lock(mutex);
      result.interrupted = true;
      return;
    }
    const DatasetEntry& entry = *pending[i];
    EvaluationRecord record;
    ImageBlob image;
    auto path = image_path(entry, options.images_dir);
    try {
      image = read_image_file(path);
    } catch (const std::exception& e) {
      record.sample_id = entry.sample_id;
      record.alpha = options.alpha;
      record.failed = true;
      record.error = "image not found: " + path.string();
    }
    if (!record.failed) record = evaluate_sample(entry.sample_id, entry.graph, image, judge, params);

    std::lock_guard lock(mutex);
    log << record_to_json(record) << '\n';
    log.flush();
    ++result.evaluated;
    records[record.sample_id] = record;
    if (options.on_record) options.on_record(record);
  });
  log.close();

  for (const auto& entry : entries) {
    auto it = records.find(entry.sample_id);
    if (it != records.end() && it->second.failed) ++result.failed;
  }
  ReportConfig config{options.alpha, options.gamma, options.seed, judge.model_name()};
  result.report = write_report(records, entries, config, options.output_dir);
  return result;
}

}  // namespace scenebench
