#include "scenebench/feedback_runner.hpp"

#include <cctype>
#include <cstdio>
#include <mutex>

#include <json.hpp>

#include "scenebench/errors.hpp"
#include "scenebench/parallel.hpp"

namespace scenebench {

using nlohmann::json;

namespace {

std::string file_stem(std::string_view sample_id) {
  std::string out;
  for (char c : sample_id) {
    bool safe = std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.';
    out.push_back(safe ? c : '_');
  }
  return out;
}

std::string extension_for(const ImageBlob& image) {
  std::string_view mime = image.mime_type();
  if (mime == "image/png") return ".png";
  if (mime == "image/jpeg") return ".jpg";
  if (!image.empty() && image.bytes().front() == '{') return ".json";  // fact-set image
  return ".bin";
}

std::string pct(const std::optional<double>& v) { return v ? format_percent(*v) : ""; }

}  // namespace

FeedbackRunResult run_feedback_settings(std::span<const DatasetEntry> entries, const GeneratorFactory& generators,
                                        Judge& judge, const FeedbackRunOptions& options) {
  FeedbackRunResult result;
  const ReportConfig config{options.alpha, options.gamma, options.seed, judge.model_name()};

  for (const auto& setting : options.settings) {
    if (setting != "baseline" && setting != "composition" && setting != "feedback") {
      throw ConfigError("unknown feedback setting \"" + setting + "\"");
    }
    const auto dir = options.output_dir / setting;
    std::filesystem::create_directories(dir);

    SettingReport row{setting, {}, 0, {}};
    std::map<std::string, EvaluationRecord> records;
    std::mutex mutex;

    parallel_for(entries.size(), options.concurrency, [&](std::size_t i) {
      const DatasetEntry& entry = entries[i];
      FeedbackParams params;
      params.alpha = options.alpha;
      params.lambda0 = options.lambda0;
      params.lambda1 = options.lambda1;
      params.max_iterations = setting == "feedback" ? options.max_iterations : 0;
      params.seed = options.seed;
      params.vocab = options.vocab;
      params.composer = options.composer;
      params.size = options.size;
      params.parallelism = options.judge_parallelism;
      if (setting == "baseline") params.prompt_override = serialize_triplets(entry.graph);

      auto generator = generators(entry.graph);
      FeedbackResult fb = run_feedback(entry.sample_id, entry.graph, *generator, judge, params);

      EvaluationRecord record;
      if (const FeedbackIteration* final = fb.final_iteration(); final && !fb.failed) {
        record = final->record;
        if (options.save_images) {
          write_bytes_file(dir / (file_stem(entry.sample_id) + extension_for(final->image)), final->image.bytes());
        }
      } else {
        record.sample_id = entry.sample_id;
        record.alpha = options.alpha;
        record.failed = true;
        record.error = fb.error;
      }

      std::lock_guard lock(mutex);
      row.generation_calls += fb.generation_calls;
      for (auto& w : fb.warnings) row.warnings.push_back(entry.sample_id + ": " + w);
      records[entry.sample_id] = std::move(record);
    });

    std::string text;
    for (const auto& [id, r] : records) {
      text += record_to_json(r) + "\n";
      if (r.failed) ++result.failed;
    }
    write_text_file(dir / "records.jsonl", text);
    row.report = write_report(records, entries, config, dir);
    result.rows.push_back(std::move(row));
  }

  write_text_file(options.output_dir / "report.json", feedback_report_to_json(result));
  write_text_file(options.output_dir / "report.csv", feedback_report_to_csv(result));
  return result;
}

std::string feedback_report_to_json(const FeedbackRunResult& result) {
  json rows = json::array();
  for (const auto& row : result.rows) {
    rows.push_back({{"setting", row.setting},
                    {"generation_calls", row.generation_calls},
                    {"report", json::parse(report_to_json(row.report))}});
  }
  return json{{"settings", std::move(rows)}, {"failed", result.failed}}.dump(2) + "\n";
}

std::string feedback_report_to_csv(const FeedbackRunResult& result) {
  std::string out = "setting,n,object_recall,relation_recall,sgscore\n";
  for (const auto& row : result.rows) {
    const GroupStats& s = row.report.overall;
    out += row.setting + "," + std::to_string(s.n) + "," + pct(s.mean_or) + "," + pct(s.mean_rr) + "," +
           pct(s.mean_sg) + "\n";
  }
  return out;
}

std::string feedback_report_to_table(const FeedbackRunResult& result) {
  std::string out;
  char line[160];
  std::snprintf(line, sizeof line, "%-14s %6s %8s %8s %8s\n", "setting", "n", "ObjRec", "RelRec", "SGScore");
  out += line;
  for (const auto& row : result.rows) {
    const GroupStats& s = row.report.overall;
    std::snprintf(line, sizeof line, "%-14s %6zu %8s %8s %8s\n", row.setting.c_str(), s.n, pct(s.mean_or).c_str(),
                  pct(s.mean_rr).c_str(), pct(s.mean_sg).c_str());
    out += line;
  }
  return out;
}

}  // namespace scenebench
