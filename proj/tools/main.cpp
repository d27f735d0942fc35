#include <atomic>
#include <chrono>
#include <csignal>
#include <iostream>
#include <optional>
#include <stop_token>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "scenebench/annotate.hpp"
#include "scenebench/attention.hpp"
#include "scenebench/coco.hpp"
#include "scenebench/config.hpp"
#include "scenebench/dataset.hpp"
#include "scenebench/errors.hpp"
#include "scenebench/eval_runner.hpp"
#include "scenebench/feedback_runner.hpp"
#include "scenebench/generation.hpp"
#include "scenebench/judge.hpp"
#include "scenebench/questions.hpp"
#include "scenebench/study.hpp"

namespace sb = scenebench;
using nlohmann::json;

namespace {

volatile std::sig_atomic_t g_interrupted = 0;

void on_signal(int) { g_interrupted = 1; }

/// Turns SIGINT/SIGTERM into a stop request observed between samples.
class InterruptWatch {
 public:
  InterruptWatch() {
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    watcher_ = std::jthread([this](std::stop_token self) {
      while (!self.stop_requested()) {
        if (g_interrupted) {
          std::cerr << "interrupt received; finishing samples in flight\n";
          source_.request_stop();
          return;
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(100));
      }
    });
  }
  std::stop_token token() const { return source_.get_token(); }

 private:
  std::stop_source source_;
  std::jthread watcher_;
};

/// Flags shared by every subcommand; unset values leave the config alone.
struct CommonFlags {
  std::string config_path;
  std::optional<double> alpha, gamma, lambda0, lambda1;
  std::optional<std::uint64_t> seed;
  std::optional<int> max_iterations;
  std::optional<std::size_t> concurrency;
  std::string output_dir;
  bool resume = false;
};

void add_common_flags(CLI::App& app, CommonFlags& f) {
  app.add_option("--config", f.config_path, "JSON run configuration (${VAR} is read from the environment)");
  app.add_option("--alpha", f.alpha, "Object-recall weight in SGScore (default 0.5)");
  app.add_option("--gamma", f.gamma, "Node weight in scene complexity (default 0)");
  app.add_option("--lambda0", f.lambda0, "Weight of the previous image in feedback rounds (default 0.5)");
  app.add_option("--lambda1", f.lambda1, "Weight of the missing-facts reference image (default 0.5)");
  app.add_option("--seed", f.seed, "Run seed for distractors, sampling and display order");
  app.add_option("--max-iterations", f.max_iterations, "Feedback rounds after the first image (default 1)");
  app.add_option("--concurrency", f.concurrency, "Samples processed concurrently");
  app.add_option("-o,--output-dir", f.output_dir, "Directory for records, reports and responses");
  app.add_flag("--resume", f.resume, "Keep existing records and evaluate only missing samples");
}

sb::RunConfig resolve_config(const CommonFlags& f) {
  sb::RunConfig c = f.config_path.empty() ? sb::RunConfig{} : sb::load_run_config(f.config_path);
  if (f.alpha) c.alpha = *f.alpha;
  if (f.gamma) c.gamma = *f.gamma;
  if (f.lambda0) c.lambda0 = *f.lambda0;
  if (f.lambda1) c.lambda1 = *f.lambda1;
  if (f.seed) c.seed = *f.seed;
  if (f.max_iterations) c.max_iterations = *f.max_iterations;
  if (f.concurrency) c.concurrency = *f.concurrency;
  if (!f.output_dir.empty()) c.output_dir = f.output_dir;
  c.validate();
  return c;
}

std::shared_ptr<sb::ChatBackend> retrying(const sb::BackendConfig& config) {
  auto backend = sb::make_chat_backend(config);
  if (!backend) return nullptr;
  return std::make_shared<sb::RetryingChatBackend>(backend, sb::RetryPolicy{config.max_retries, {}});
}

std::unique_ptr<sb::Judge> make_judge(const sb::RunConfig& c) {
  auto backend = sb::make_chat_backend(c.judge);
  if (!backend) throw sb::ConfigError("no judge backend configured (judge.kind is \"none\")");
  std::shared_ptr<sb::AnswerCache> cache;
  if (!c.cache.empty()) cache = std::make_shared<sb::AnswerCache>(c.cache);
  return std::make_unique<sb::Judge>(backend, sb::RetryPolicy{c.judge.max_retries, {}}, cache);
}

std::vector<sb::DatasetEntry> load_dataset(const sb::RunConfig& c) {
  if (c.dataset.empty()) throw sb::ConfigError("no dataset given (--dataset or \"dataset\" in the config)");
  auto entries = sb::read_dataset(c.dataset);
  if (!c.labels.empty()) {
    std::size_t n = sb::attach_labels(entries, c.labels);
    std::cerr << "labeled " << n << " of " << entries.size() << " sample(s) from " << c.labels.string() << "\n";
  }
  return entries;
}

std::vector<std::string> vocab_or_default(const sb::RunConfig& c) {
  if (!c.vocab.empty()) return c.vocab;
  auto builtin = sb::default_relation_vocabulary();
  return {builtin.begin(), builtin.end()};
}

// ---------------------------------------------------------------------------

int cmd_annotate(const sb::RunConfig& c, const std::string& detections, const std::string& coco,
                 const std::string& coco_categories, bool prompts_only) {
  std::vector<sb::DetectionRecord> records;
  if (!coco.empty()) {
    std::optional<std::string> categories;
    if (!coco_categories.empty()) categories = sb::read_text_file(coco_categories);
    auto imported = sb::detections_from_coco(sb::read_text_file(coco), categories);
    for (const auto& w : imported.warnings) std::cerr << "warning: " << w << "\n";
    records = std::move(imported.records);
  } else if (!detections.empty()) {
    records = sb::read_detection_records(detections);
  } else {
    throw sb::ConfigError("annotate needs --detections or --coco");
  }

  if (prompts_only) {
    for (const auto& r : records) {
      if (!r.objects.empty()) std::cout << json{{"image", r.image_ref}, {"prompt", sb::build_annotation_prompt(r)}}.dump() << "\n";
    }
    return sb::kExitOk;
  }

  auto backend = retrying(c.annotator);
  if (!backend) throw sb::ConfigError("no annotator backend configured (annotator.kind is \"none\")");
  auto loader = [&](const sb::DetectionRecord& r) {
    auto path = c.images_dir / r.image_ref;
    return std::filesystem::exists(path) ? sb::read_image_file(path) : sb::ImageBlob{};
  };
  auto results = sb::annotate_records(records, *backend, loader, c.concurrency);

  std::vector<sb::DatasetEntry> entries;
  std::size_t skipped = 0;
  for (const auto& r : results) {
    const auto& rec = records[r.record_index];
    for (const auto& w : r.warnings) std::cerr << rec.image_ref << ": " << w << "\n";
    if (!r.graph) {
      std::cerr << rec.image_ref << ": skipped (" << r.skip_reason << ")\n";
      ++skipped;
      continue;
    }
    entries.push_back(sb::DatasetEntry{rec.image_ref, *r.graph, std::nullopt});
  }
  auto out = c.output_dir / "dataset.jsonl";
  sb::write_dataset(out, entries);
  std::cout << "annotated " << entries.size() << " image(s), skipped " << skipped << "; wrote " << out.string()
            << "\n";
  return skipped ? sb::kExitPartial : sb::kExitOk;
}

int cmd_classify(const sb::RunConfig& c) {
  auto entries = load_dataset(c);
  auto backend = retrying(c.annotator);
  if (!backend) throw sb::ConfigError("no annotator backend configured (annotator.kind is \"none\")");
  std::vector<sb::SceneGraph> graphs;
  for (const auto& e : entries) graphs.push_back(e.graph);
  auto labels = sb::classify_scenes(graphs, *backend, c.classify_batch, c.concurrency);

  std::string text;
  std::size_t failed = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto& l = labels[i];
    json row = {{"image_id", entries[i].graph.image_ref().value_or(entries[i].sample_id)},
                {"file_name", l.file_name}};
    if (l.label) {
      row["level 1"] = std::string(sb::to_string(l.label->level1));
      row["level 2"] = l.label->level2;
    } else {
      row["error"] = l.error;
      ++failed;
    }
    text += row.dump() + "\n";
  }
  auto out = c.output_dir / "labels.jsonl";
  sb::write_text_file(out, text);
  std::cout << "classified " << labels.size() - failed << " of " << labels.size() << " graph(s); wrote "
            << out.string() << "\n";
  return failed ? sb::kExitPartial : sb::kExitOk;
}

int cmd_sample(const sb::RunConfig& c) {
  auto entries = load_dataset(c);
  std::map<std::string, std::string> synonyms;
  if (!c.synonyms.empty()) synonyms = sb::parse_synonym_map(sb::read_text_file(c.synonyms));

  std::vector<sb::SceneGraph> graphs;
  for (const auto& e : entries) graphs.push_back(e.graph);
  auto filtered = sb::filter_relations(graphs, c.min_freq, synonyms);
  sb::write_text_file(c.output_dir / "vocab_stats.json", sb::vocab_stats_to_json(filtered.merged_stats));
  std::cerr << "removed " << filtered.edges_removed << " edge(s) below frequency " << c.min_freq << "\n";

  std::vector<sb::DatasetEntry> kept = entries;
  for (std::size_t i = 0; i < kept.size(); ++i) kept[i].graph = filtered.dataset[i];

  std::vector<sb::DatasetEntry> selected;
  if (c.quotas.empty()) {
    selected = kept;
  } else {
    for (auto i : sb::balanced_sample(filtered.dataset, c.gamma, c.quotas, c.seed)) selected.push_back(kept[i]);
  }
  auto out = c.output_dir / "sample.jsonl";
  sb::write_dataset(out, selected);
  std::map<sb::ComplexityLevel, std::size_t> counts;
  for (const auto& e : selected) ++counts[sb::complexity_level(sb::complexity(e.graph, c.gamma))];
  for (const auto& [level, n] : counts) std::cout << sb::to_string(level) << ": " << n << "\n";
  std::cout << "wrote " << selected.size() << " sample(s) to " << out.string() << "\n";
  return sb::kExitOk;
}

int cmd_eval(const sb::RunConfig& c, bool resume) {
  auto entries = load_dataset(c);
  auto judge = make_judge(c);
  InterruptWatch watch;
  sb::EvalRunOptions options;
  options.alpha = c.alpha;
  options.gamma = c.gamma;
  options.seed = c.seed;
  options.vocab = vocab_or_default(c);
  options.concurrency = c.concurrency;
  options.judge_parallelism = c.judge_parallelism;
  options.images_dir = c.images_dir;
  options.output_dir = c.output_dir;
  options.resume = resume;
  options.stop = watch.token();
  options.on_record = [](const sb::EvaluationRecord& r) {
    if (r.failed) std::cerr << r.sample_id << ": failed (" << r.error << ")\n";
  };
  auto result = sb::run_eval(entries, *judge, options);
  std::cout << sb::report_to_table(result.report);
  std::cout << "evaluated " << result.evaluated << ", reused " << result.reused << ", failed " << result.failed
            << (result.interrupted ? " (interrupted; rerun with --resume)" : "") << "\n";
  return result.exit_code();
}

int cmd_feedback(const sb::RunConfig& c) {
  auto entries = load_dataset(c);
  auto judge = make_judge(c);
  auto generators = sb::make_generator_factory(c.generation);
  auto composer = retrying(c.composer);
  sb::FeedbackRunOptions options;
  options.alpha = c.alpha;
  options.gamma = c.gamma;
  options.lambda0 = c.lambda0;
  options.lambda1 = c.lambda1;
  options.max_iterations = c.max_iterations;
  options.seed = c.seed;
  options.vocab = vocab_or_default(c);
  options.concurrency = c.concurrency;
  options.judge_parallelism = c.judge_parallelism;
  options.settings = c.settings;
  options.composer = composer.get();
  options.output_dir = c.output_dir;
  auto result = sb::run_feedback_settings(entries, generators, *judge, options);
  for (const auto& row : result.rows) {
    for (const auto& w : row.warnings) std::cerr << "warning: " << w << "\n";
  }
  std::cout << sb::feedback_report_to_table(result);
  return result.exit_code();
}

int cmd_report(const sb::RunConfig& c, const std::string& records_path, const std::string& responses_path) {
  if (!c.tasks.empty()) {
    auto spec = sb::load_study_spec(c.tasks);
    std::filesystem::path path =
        responses_path.empty() ? c.output_dir / "study_responses.jsonl" : std::filesystem::path(responses_path);
    std::vector<sb::StudyResponse> responses;
    for (const auto& line : sb::read_lines(path)) responses.push_back(sb::study_response_from_json(line));
    auto m = sb::study_confusion(spec, responses);
    std::printf("%-16s", "human \\ machine");
    for (const auto& l : m.labels) std::printf(" %12.12s", l.c_str());
    std::printf("\n");
    for (std::size_t h = 0; h < 4; ++h) {
      std::printf("%-16.16s", m.labels[h].c_str());
      for (std::size_t k = 0; k < 4; ++k) std::printf(" %12lld", static_cast<long long>(m.cells[h][k]));
      std::printf("\n");
    }
    std::printf("%lld scored response(s) of %zu\n", static_cast<long long>(m.total()), responses.size());
    return sb::kExitOk;
  }
  auto entries = load_dataset(c);
  std::filesystem::path path =
      records_path.empty() ? c.output_dir / "records.jsonl" : std::filesystem::path(records_path);
  auto records = sb::load_records(path);
  std::string model;
  if (c.judge.kind != "none") model = c.judge.kind == "factset" ? "factset-oracle" : c.judge.model_name;
  auto report = sb::write_report(records, entries, sb::ReportConfig{c.alpha, c.gamma, c.seed, model}, c.output_dir);
  std::cout << sb::report_to_table(report);
  return report.failed ? sb::kExitPartial : sb::kExitOk;
}

int cmd_serve_study(const sb::RunConfig& c) {
  if (c.tasks.empty()) throw sb::ConfigError("serve-study needs --tasks");
  auto state = std::make_shared<sb::StudyState>(sb::load_study_spec(c.tasks), c.output_dir / "study_responses.jsonl");
  sb::StudyServer server(state, c.static_dir);
  std::cout << "serving " << state->spec().tasks.size() << " task(s) on http://" << c.host << ":" << c.port
            << "/ (responses: " << (c.output_dir / "study_responses.jsonl").string() << ")" << std::endl;
  server.listen_blocking(c.host, c.port);
  return sb::kExitOk;
}

int cmd_kernel_check(std::uint64_t seed, int trials) {
  bool ok = true;
  for (const auto& check : sb::attn::run_kernel_checks(seed, trials)) {
    std::cout << (check.passed ? "PASS " : "FAIL ") << check.name << "  " << check.detail << "\n";
    ok = ok && check.passed;
  }
  return ok ? 0 : 1;
}

int cmd_gen_stub(const std::string& host, int port) {
  sb::GenerationStubServer server;
  std::cout << "generation stub on http://" << host << ":" << port << "/generate" << std::endl;
  server.listen_blocking(host, port);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Scene-graph factual consistency toolkit"};
  app.require_subcommand(1);
  CommonFlags flags;

  std::string dataset, images_dir, labels, tasks, static_dir, host, records, responses;
  std::string detections, coco, coco_categories, synonyms, settings;
  std::optional<int> port;
  std::optional<std::size_t> min_freq, batch;
  std::vector<std::string> quotas;
  bool prompts_only = false;
  int trials = 20;
  int stub_port = 8188;

  auto add = [&](const char* name, const char* help) {
    auto* sub = app.add_subcommand(name, help);
    add_common_flags(*sub, flags);
    return sub;
  };
  auto dataset_opts = [&](CLI::App* sub) {
    sub->add_option("--dataset", dataset, "Dataset JSONL (one annotated scene graph per line)");
    sub->add_option("--labels", labels, "Scene labels JSONL written by classify");
  };

  auto* annotate = add("annotate", "Ask the annotator model for scene graphs of detection records");
  annotate->add_option("--detections", detections, "Detection records JSONL");
  annotate->add_option("--coco", coco, "COCO instances JSON");
  annotate->add_option("--coco-categories", coco_categories, "Separate COCO categories JSON");
  annotate->add_option("--images-dir", images_dir, "Directory holding the images");
  annotate->add_flag("--prompts-only", prompts_only, "Print the annotation prompts without calling a model");

  auto* classify = add("classify", "Label scene themes of a dataset in batches");
  dataset_opts(classify);
  classify->add_option("--batch", batch, "Graphs per classification prompt (default 16)");

  auto* sample = add("sample", "Filter rare relations and draw a complexity-balanced sample");
  dataset_opts(sample);
  sample->add_option("--min-freq", min_freq, "Drop relations rarer than this after synonym merging (default 100)");
  sample->add_option("--synonyms", synonyms, "JSON object mapping relation variants to canonical names");
  sample->add_option("--quota", quotas, "Per-level quota, e.g. --quota simple=100 --quota hard=50");

  auto* eval = add("eval", "Score images against their scene graphs");
  dataset_opts(eval);
  eval->add_option("--images-dir", images_dir, "Directory holding the generated images");

  auto* feedback = add("feedback", "Run baseline / composition / feedback generation settings");
  dataset_opts(feedback);
  feedback->add_option("--settings", settings, "Comma-separated subset of baseline,composition,feedback");

  auto* report = add("report", "Rebuild report.json/report.csv from records, or summarize a study");
  dataset_opts(report);
  report->add_option("--records", records, "Records JSONL (default <output-dir>/records.jsonl)");
  report->add_option("--tasks", tasks, "Study tasks file; prints the labeled confusion matrix");
  report->add_option("--responses", responses, "Study responses (default <output-dir>/study_responses.jsonl)");

  auto* serve = add("serve-study", "Serve the four-to-one human study");
  serve->add_option("--tasks", tasks, "Study tasks file")->required();
  serve->add_option("--static-dir", static_dir, "Built annotation UI to serve at /");
  serve->add_option("--host", host, "Bind address (default 127.0.0.1)");
  serve->add_option("--port", port, "Port (default 8080)");

  auto* kernel = add("kernel-check", "Property-check the attention merge kernel");
  kernel->add_option("--trials", trials, "Random shapes per property")->check(CLI::PositiveNumber);

  auto* stub = app.add_subcommand("gen-stub", "Serve the generation wire contract with placeholder images");
  stub->add_option("--host", host, "Bind address (default 127.0.0.1)");
  stub->add_option("--port", stub_port, "Port (default 8188)");

  CLI11_PARSE(app, argc, argv);

  try {
    sb::RunConfig c = resolve_config(flags);
    if (!dataset.empty()) c.dataset = dataset;
    if (!images_dir.empty()) c.images_dir = images_dir;
    if (!labels.empty()) c.labels = labels;
    if (!tasks.empty()) c.tasks = tasks;
    if (!static_dir.empty()) c.static_dir = static_dir;
    if (!host.empty()) c.host = host;
    if (port) c.port = *port;
    if (min_freq) c.min_freq = *min_freq;
    if (batch) c.classify_batch = *batch;
    if (!synonyms.empty()) c.synonyms = synonyms;
    for (const auto& q : quotas) {
      auto eq = q.find('=');
      if (eq == std::string::npos) throw sb::ConfigError("quota \"" + q + "\" must look like level=count");
      c.quotas[sb::complexity_level_from_string(q.substr(0, eq))] = std::stoul(q.substr(eq + 1));
    }
    if (!settings.empty()) {
      c.settings.clear();
      for (auto part : CLI::detail::split(settings, ',')) c.settings.push_back(CLI::detail::trim_copy(part));
    }
    c.validate();

    if (*annotate) return cmd_annotate(c, detections, coco, coco_categories, prompts_only);
    if (*classify) return cmd_classify(c);
    if (*sample) return cmd_sample(c);
    if (*eval) return cmd_eval(c, flags.resume);
    if (*feedback) return cmd_feedback(c);
    if (*report) return cmd_report(c, records, responses);
    if (*serve) return cmd_serve_study(c);
    if (*kernel) return cmd_kernel_check(c.seed, trials);
    if (*stub) return cmd_gen_stub(host.empty() ? "127.0.0.1" : host, stub_port);
  } catch (const sb::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return sb::kExitBackend;
  } catch (const sb::BackendError& e) {
    std::cerr << "backend error: " << e.what() << "\n";
    return sb::kExitBackend;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
