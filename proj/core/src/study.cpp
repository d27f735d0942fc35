#include "scenebench/study.hpp"

#include <chrono>
#include <ctime>

#include <json.hpp>

#include "scenebench/dataset.hpp"
#include "scenebench/errors.hpp"
#include "scenebench/rng.hpp"

namespace scenebench {

using nlohmann::json;

namespace {

std::string utc_timestamp() {
  auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::optional<int> machine_for(const StudyTask& task) {
  if (!task.sgscores) return std::nullopt;
  return machine_choice(std::span<const double, 4>(*task.sgscores));
}

}  // namespace

std::array<int, 4> study_display_order(std::uint64_t seed, std::string_view task_id) {
  std::array<int, 4> order{0, 1, 2, 3};
  Rng rng(derive_seed(seed, task_id, 0));
  shuffle(std::span<int>(order), rng);
  return order;
}

int resolve_choice(const std::array<int, 4>& display_order, int displayed) {
  if (displayed < 0 || displayed > 3) throw DomainError("displayed choice must lie in 0..3");
  return display_order[static_cast<std::size_t>(displayed)];
}

StudySpec parse_study_spec(std::string_view json_text, const std::filesystem::path& base_dir) {
  json doc;
  try {
    doc = json::parse(json_text.begin(), json_text.end());
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("malformed tasks file: ") + e.what(), e.byte);
  }
  if (!doc.is_object()) throw StructuralError("tasks file must be a JSON object");
  StudySpec spec;
  try {
    if (auto it = doc.find("models"); it != doc.end()) {
      if (!it->is_array() || it->size() != 4) throw StructuralError("\"models\" must list 4 names");
      for (std::size_t i = 0; i < 4; ++i) spec.models[i] = (*it)[i].get<std::string>();
    }
    spec.seed = doc.value("seed", std::uint64_t{0});
    std::filesystem::path root = doc.value("images_root", std::string());
    spec.images_root = root.is_absolute() ? root : base_dir / root;

    std::set<std::string> seen;
    const json& tasks = doc.at("tasks");
    for (std::size_t i = 0; i < tasks.size(); ++i) {
      const json& t = tasks[i];
      StudyTask task;
      task.task_id = t.at("task_id").is_string() ? t.at("task_id").get<std::string>() : t.at("task_id").dump();
      if (!seen.insert(task.task_id).second) throw StructuralError("duplicate task id " + task.task_id);
      task.original = t.at("original").get<std::string>();
      const json& cands = t.at("candidates");
      if (!cands.is_array() || cands.size() != 4) {
        throw StructuralError("task " + task.task_id + " must have exactly 4 candidates");
      }
      for (std::size_t c = 0; c < 4; ++c) task.candidates[c] = cands[c].get<std::string>();
      if (auto s = t.find("sgscores"); s != t.end() && !s->is_null()) {
        if (!s->is_array() || s->size() != 4) {
          throw StructuralError("task " + task.task_id + ": \"sgscores\" must hold 4 values");
        }
        std::array<double, 4> scores{};
        for (std::size_t c = 0; c < 4; ++c) scores[c] = (*s)[c].get<double>();
        task.sgscores = scores;
      }
      task.display_order = study_display_order(spec.seed, task.task_id);
      spec.tasks.push_back(std::move(task));
    }
  } catch (const json::exception& e) {
    throw StructuralError(std::string("tasks file: ") + e.what());
  }
  return spec;
}

StudySpec load_study_spec(const std::filesystem::path& path) {
  return parse_study_spec(read_text_file(path), path.parent_path());
}

std::string study_response_to_json(const StudyResponse& r) {
  return json{{"task_id", r.task_id},
              {"annotator_id", r.annotator_id},
              {"displayed_choice", r.displayed_choice},
              {"resolved_choice", r.resolved_choice},
              {"timestamp", r.timestamp}}
      .dump();
}

StudyResponse study_response_from_json(std::string_view line) {
  try {
    json doc = json::parse(line.begin(), line.end());
    return StudyResponse{doc.at("task_id").get<std::string>(), doc.at("annotator_id").get<std::string>(),
                         doc.at("displayed_choice").get<int>(), doc.at("resolved_choice").get<int>(),
                         doc.value("timestamp", std::string())};
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("malformed response: ") + e.what(), e.byte);
  } catch (const json::exception& e) {
    throw StructuralError(std::string("response: ") + e.what());
  }
}

// ---------------------------------------------------------------------------

StudyState::StudyState(StudySpec spec, std::filesystem::path responses_path) : spec_(std::move(spec)) {
  for (std::size_t i = 0; i < spec_.tasks.size(); ++i) index_[spec_.tasks[i].task_id] = i;

  if (std::filesystem::exists(responses_path)) {
    auto lines = read_lines(responses_path);
    for (std::size_t i = 0; i < lines.size(); ++i) {
      StudyResponse r;
      try {
        r = study_response_from_json(lines[i]);
      } catch (const Error&) {
        if (i + 1 == lines.size()) break;  // torn final write
        throw;
      }
      if (!index_.contains(r.task_id)) continue;
      if (answered_.emplace(r.annotator_id, r.task_id).second) responses_.push_back(std::move(r));
    }
  }
  if (responses_path.has_parent_path()) std::filesystem::create_directories(responses_path.parent_path());
  log_.open(responses_path, std::ios::app | std::ios::binary);
  if (!log_) throw ConfigError("cannot append to " + responses_path.string());
}

const StudyTask* StudyState::find(const std::string& task_id) const {
  auto it = index_.find(task_id);
  return it == index_.end() ? nullptr : &spec_.tasks[it->second];
}

std::size_t StudyState::answered_count(const std::string& annotator) const {
  auto lo = answered_.lower_bound({annotator, std::string()});
  std::size_t n = 0;
  for (auto it = lo; it != answered_.end() && it->first == annotator; ++it) ++n;
  return n;
}

std::string StudyState::next_task_json(const std::string& annotator) const {
  std::lock_guard lock(mutex_);
  json progress = {{"answered", answered_count(annotator)}, {"total", spec_.tasks.size()}};
  for (const auto& task : spec_.tasks) {
    if (answered_.contains({annotator, task.task_id})) continue;
    const std::string base = "/api/images/" + task.task_id + "/";
    json urls = json::array();
    for (int p = 0; p < 4; ++p) urls.push_back(base + std::to_string(p));
    return json{{"done", false},
                {"task_id", task.task_id},
                {"original_url", base + "original"},
                {"candidate_urls", std::move(urls)},
                {"progress", std::move(progress)}}
        .dump();
  }
  return json{{"done", true}, {"progress", std::move(progress)}}.dump();
}

std::pair<SubmitStatus, std::optional<StudyResponse>> StudyState::submit(const std::string& task_id,
                                                                         const std::string& annotator,
                                                                         int displayed_choice) {
  const StudyTask* task = find(task_id);
  if (!task) return {SubmitStatus::UnknownTask, std::nullopt};
  if (displayed_choice < 0 || displayed_choice > 3) return {SubmitStatus::InvalidChoice, std::nullopt};

  std::lock_guard lock(mutex_);
  if (!answered_.emplace(annotator, task_id).second) return {SubmitStatus::Duplicate, std::nullopt};
  StudyResponse r{task_id, annotator, displayed_choice, resolve_choice(task->display_order, displayed_choice),
                  utc_timestamp()};
  log_ << study_response_to_json(r) << '\n';
  log_.flush();
  responses_.push_back(r);
  return {SubmitStatus::Accepted, r};
}

std::vector<StudyResponse> StudyState::responses() const {
  std::lock_guard lock(mutex_);
  return responses_;
}

ConfusionMatrix study_confusion(const StudySpec& spec, const std::vector<StudyResponse>& responses) {
  std::map<std::string, const StudyTask*> tasks;
  for (const auto& t : spec.tasks) tasks[t.task_id] = &t;
  std::vector<ChoicePair> pairs;
  for (const auto& r : responses) {
    auto it = tasks.find(r.task_id);
    if (it == tasks.end()) continue;
    if (auto machine = machine_for(*it->second)) pairs.push_back({r.resolved_choice, *machine});
  }
  return confusion_matrix(pairs, spec.models);
}

ConfusionMatrix StudyState::confusion() const {
  StudySpec anonymous;
  anonymous.models = {"0", "1", "2", "3"};
  anonymous.tasks = spec_.tasks;
  return study_confusion(anonymous, responses());
}

std::string StudyState::export_json() const {
  auto all = responses();
  ConfusionMatrix m = confusion();
  json rows = json::array();
  std::size_t unscored = 0;
  for (const auto& r : all) {
    rows.push_back(json::parse(study_response_to_json(r)));
    if (const StudyTask* t = find(r.task_id); t && !t->sgscores) ++unscored;
  }
  return json{{"responses", std::move(rows)},
              {"confusion", {{"cells", m.cells}, {"labels", m.labels}, {"total", m.total()}}},
              {"unscored", unscored}}
      .dump();
}

std::optional<std::filesystem::path> StudyState::image_path(const std::string& task_id,
                                                            const std::string& slot) const {
  const StudyTask* task = find(task_id);
  if (!task) return std::nullopt;
  if (slot == "original") return spec_.images_root / task->original;
  if (slot.size() != 1 || slot[0] < '0' || slot[0] > '3') return std::nullopt;
  int canonical = task->display_order[static_cast<std::size_t>(slot[0] - '0')];
  return spec_.images_root / task->candidates[static_cast<std::size_t>(canonical)];
}

}  // namespace scenebench
