#include "scenebench/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <set>

#include <json.hpp>

#include "scenebench/errors.hpp"
#include "scenebench/parallel.hpp"
#include "scenebench/rng.hpp"

namespace scenebench {

using nlohmann::json;

double object_recall(const SceneGraph& gt, const ObjectVerdicts& verdicts) {
  if (gt.num_objects() == 0) {
    throw DomainError("object recall is undefined for a graph without objects");
  }
  std::size_t present = 0;
  for (const auto& [id, box] : gt.objects()) {
    auto it = verdicts.find(id);
    if (it == verdicts.end()) {
      throw StructuralError("no object verdict for " + id.raw());
    }
    if (it->second) ++present;
  }
  return static_cast<double>(present) / static_cast<double>(gt.num_objects());
}

double relation_recall(const SceneGraph& gt, std::span<const RelationVerdict> verdicts) {
  if (verdicts.size() != gt.num_edges()) {
    throw StructuralError("relation verdict count " + std::to_string(verdicts.size()) +
                          " does not match edge count " + std::to_string(gt.num_edges()));
  }
  if (gt.num_edges() == 0) return 1.0;
  auto correct = std::count_if(verdicts.begin(), verdicts.end(),
                               [](const RelationVerdict& v) { return v.correct; });
  return static_cast<double>(correct) / static_cast<double>(gt.num_edges());
}

double sgscore(double object_recall, double relation_recall, double alpha) {
  auto in_unit = [](double x) { return x >= 0.0 && x <= 1.0; };
  if (!in_unit(object_recall) || !in_unit(relation_recall) || !in_unit(alpha)) {
    throw DomainError("sgscore arguments must lie in [0, 1]");
  }
  return alpha * object_recall + (1.0 - alpha) * relation_recall;
}

std::uint64_t relation_question_seed(std::uint64_t run_seed, std::string_view sample_id,
                                     std::size_t edge_index) {
  return derive_seed(run_seed, sample_id, edge_index);
}

EvaluationRecord evaluate_sample(std::string_view sample_id, const SceneGraph& gt,
                                 const ImageBlob& image, Judge& judge, const EvalParams& params) {
  if (image.empty()) throw DomainError("evaluate_sample: empty image for " + std::string(sample_id));
  if (gt.num_objects() == 0) {
    throw DomainError("evaluate_sample: sample " + std::string(sample_id) + " has no objects");
  }

  EvaluationRecord rec;
  rec.sample_id = std::string(sample_id);
  rec.alpha = params.alpha;

  // Instances grouped by category, in id order.
  std::map<std::string, std::vector<ObjectId>> by_category;
  for (const auto& [id, box] : gt.objects()) by_category[id.category()].push_back(id);
  std::vector<const std::pair<const std::string, std::vector<ObjectId>>*> categories;
  for (const auto& entry : by_category) categories.push_back(&entry);

  std::vector<RelationQuestion> relation_questions;
  relation_questions.reserve(gt.num_edges());
  for (std::size_t i = 0; i < gt.num_edges(); ++i) {
    relation_questions.push_back(build_relation_question(
        gt.edges()[i], params.vocab, relation_question_seed(params.seed, sample_id, i)));
  }

  std::vector<int> credited(categories.size(), 0);
  std::vector<JudgeAnswer> relation_answers(relation_questions.size());
  std::mutex abstain_mutex;
  int abstentions = 0;

  auto note = [&](const JudgeAnswer& a) {
    if (a.abstained) {
      std::lock_guard lock(abstain_mutex);
      ++abstentions;
    }
  };

  const std::size_t jobs = categories.size() + relation_questions.size();
  try {
    parallel_for(jobs, params.parallelism, [&](std::size_t job) {
      if (job < categories.size()) {
        const auto& [category, ids] = *categories[job];
        for (int k = static_cast<int>(ids.size()); k >= 1; --k) {
          Question q = build_presence_question(category, k);
          JudgeAnswer a = judge.ask(image, q);
          note(a);
          if (a.yes.value_or(false)) {
            credited[job] = k;
            break;
          }
        }
      } else {
        std::size_t i = job - categories.size();
        Question q = relation_questions[i];
        relation_answers[i] = judge.ask(image, q);
        note(relation_answers[i]);
      }
    });
  } catch (const BackendError& e) {
    rec.failed = true;
    rec.error = e.what();
    return rec;
  }

  std::set<ObjectId> attested;
  for (std::size_t i = 0; i < relation_questions.size(); ++i) {
    const auto& q = relation_questions[i];
    int choice = relation_answers[i].choice_index.value_or(3);
    bool correct = choice == q.answer_index;
    rec.relation_verdicts.push_back(
        RelationVerdict{gt.edges()[i], q.choices[static_cast<std::size_t>(choice)], correct});
    if (correct) {
      attested.insert(gt.edges()[i].source);
      attested.insert(gt.edges()[i].target);
    }
  }
  // A count answer says how many instances are present, not which. Credit the
  // instances with a correctly judged incident edge first, then the rest in id
  // order, so presence and relation verdicts never contradict each other.
  for (std::size_t c = 0; c < categories.size(); ++c) {
    auto ids = categories[c]->second;
    std::stable_partition(ids.begin(), ids.end(), [&](const ObjectId& id) { return attested.contains(id); });
    for (std::size_t k = 0; k < ids.size(); ++k) {
      rec.object_verdicts.emplace(ids[k], static_cast<int>(k) < credited[c]);
    }
  }
  rec.abstentions = abstentions;
  rec.object_recall = object_recall(gt, rec.object_verdicts);
  rec.relation_recall = relation_recall(gt, rec.relation_verdicts);
  rec.sgscore = sgscore(rec.object_recall, rec.relation_recall, params.alpha);
  return rec;
}

// ---------------------------------------------------------------------------
// JSONL

std::string record_to_json(const EvaluationRecord& r) {
  json objects = json::object();
  for (const auto& [id, present] : r.object_verdicts) objects[id.raw()] = present;
  json relations = json::array();
  for (const auto& v : r.relation_verdicts) {
    relations.push_back({{"source", v.edge.source.raw()},
                         {"target", v.edge.target.raw()},
                         {"relation", v.edge.relation},
                         {"chosen", v.chosen_relation},
                         {"correct", v.correct}});
  }
  json doc = {{"v", EvaluationRecord::kSchemaVersion},
              {"sample_id", r.sample_id},
              {"failed", r.failed},
              {"object_verdicts", std::move(objects)},
              {"relation_verdicts", std::move(relations)},
              {"object_recall", r.object_recall},
              {"relation_recall", r.relation_recall},
              {"sgscore", r.sgscore},
              {"alpha", r.alpha},
              {"abstentions", r.abstentions}};
  if (!r.error.empty()) doc["error"] = r.error;
  return doc.dump();
}

EvaluationRecord record_from_json(std::string_view line) {
  json doc;
  try {
    doc = json::parse(line.begin(), line.end());
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("malformed evaluation record: ") + e.what(), e.byte);
  }
  try {
    int version = doc.at("v").get<int>();
    if (version != EvaluationRecord::kSchemaVersion) {
      throw StructuralError("unsupported evaluation record version " + std::to_string(version));
    }
    EvaluationRecord r;
    r.sample_id = doc.at("sample_id").get<std::string>();
    r.failed = doc.value("failed", false);
    r.error = doc.value("error", "");
    for (const auto& [key, value] : doc.at("object_verdicts").items()) {
      r.object_verdicts.emplace(ObjectId::parse(key), value.get<bool>());
    }
    for (const auto& v : doc.at("relation_verdicts")) {
      r.relation_verdicts.push_back(RelationVerdict{
          Edge{ObjectId::parse(v.at("source").get<std::string>()),
               ObjectId::parse(v.at("target").get<std::string>()), v.at("relation").get<std::string>()},
          v.at("chosen").get<std::string>(), v.at("correct").get<bool>()});
    }
    r.object_recall = doc.at("object_recall").get<double>();
    r.relation_recall = doc.at("relation_recall").get<double>();
    r.sgscore = doc.at("sgscore").get<double>();
    r.alpha = doc.at("alpha").get<double>();
    r.abstentions = doc.value("abstentions", 0);
    return r;
  } catch (const json::exception& e) {
    throw StructuralError(std::string("evaluation record: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Aggregation

namespace {

struct Accumulator {
  std::vector<const EvaluationRecord*> records;

  GroupStats finish() const {
    GroupStats s;
    s.n = records.size();
    if (s.n == 0) return s;
    double sum_or = 0, sum_rr = 0, sum_sg = 0;
    for (const auto* r : records) {
      sum_or += r->object_recall;
      sum_rr += r->relation_recall;
      sum_sg += r->sgscore;
    }
    const double n = static_cast<double>(s.n);
    s.mean_or = sum_or / n;
    s.mean_rr = sum_rr / n;
    s.mean_sg = sum_sg / n;
    double ss = 0;
    for (const auto* r : records) ss += (r->sgscore - *s.mean_sg) * (r->sgscore - *s.mean_sg);
    s.std_sg = std::sqrt(ss / n);
    return s;
  }
};

constexpr ComplexityLevel kLevels[] = {ComplexityLevel::Simple, ComplexityLevel::Medium,
                                       ComplexityLevel::Hard};

json percent_or_null(const std::optional<double>& v) {
  if (!v) return nullptr;
  return std::stod(format_percent(*v));
}

json group_json(std::string_view name, const GroupStats& s) {
  return {{"group", name},
          {"n", s.n},
          {"object_recall", percent_or_null(s.mean_or)},
          {"relation_recall", percent_or_null(s.mean_rr)},
          {"sgscore", percent_or_null(s.mean_sg)},
          {"sgscore_std", percent_or_null(s.std_sg)}};
}

std::string cell(const std::optional<double>& v) { return v ? format_percent(*v) : ""; }

}  // namespace

RunReport aggregate(std::span<const EvaluationRecord> records,
                    const std::map<std::string, GraphInfo>& graphs, const ReportConfig& config) {
  std::vector<const EvaluationRecord*> sorted;
  sorted.reserve(records.size());
  for (const auto& r : records) sorted.push_back(&r);
  std::sort(sorted.begin(), sorted.end(),
            [](const auto* a, const auto* b) { return a->sample_id < b->sample_id; });
  for (std::size_t i = 1; i < sorted.size(); ++i) {
    if (sorted[i]->sample_id == sorted[i - 1]->sample_id) {
      throw StructuralError("duplicate evaluation record for sample " + sorted[i]->sample_id);
    }
  }

  RunReport report;
  report.config = config;
  Accumulator overall;
  std::map<ComplexityLevel, Accumulator> levels;
  std::map<std::string, Accumulator> categories;
  for (const auto* r : sorted) {
    auto it = graphs.find(r->sample_id);
    if (it == graphs.end() || !it->second.graph) {
      throw StructuralError("evaluation record " + r->sample_id + " has no matching graph");
    }
    if (r->failed) {
      ++report.failed;
      continue;
    }
    overall.records.push_back(r);
    levels[complexity_level(complexity(*it->second.graph, config.gamma))].records.push_back(r);
    if (it->second.category) categories[*it->second.category].records.push_back(r);
  }
  report.overall = overall.finish();
  for (auto level : kLevels) report.levels[level] = levels[level].finish();
  for (const auto& [name, acc] : categories) report.categories[name] = acc.finish();
  return report;
}

std::string format_percent(double fraction) {
  double hundredths = std::floor(fraction * 10000.0 + 0.5 + 1e-9);
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", hundredths / 100.0);
  return buf;
}

std::string report_to_json(const RunReport& report) {
  json groups = json::array();
  groups.push_back(group_json("Overall", report.overall));
  for (auto level : kLevels) groups.push_back(group_json(to_string(level), report.levels.at(level)));
  for (const auto& [name, stats] : report.categories) groups.push_back(group_json(name, stats));
  json doc = {{"config",
               {{"alpha", report.config.alpha},
                {"gamma", report.config.gamma},
                {"seed", report.config.seed},
                {"model_name", report.config.model_name}}},
              {"failed", report.failed},
              {"groups", std::move(groups)}};
  return doc.dump(2) + "\n";
}

std::string report_to_csv(const RunReport& report) {
  std::string out = "model,n,overall,simple,medium,hard,overall_std,simple_std,medium_std,hard_std\n";
  std::string model = report.config.model_name;
  if (model.find_first_of(",\"") != std::string::npos) {
    std::string quoted = "\"";
    for (char c : model) quoted += c == '"' ? std::string("\"\"") : std::string(1, c);
    model = quoted + "\"";
  }
  out += model + "," + std::to_string(report.overall.n) + "," + cell(report.overall.mean_sg);
  for (auto level : kLevels) out += "," + cell(report.levels.at(level).mean_sg);
  out += "," + cell(report.overall.std_sg);
  for (auto level : kLevels) out += "," + cell(report.levels.at(level).std_sg);
  out += "\n";
  return out;
}

std::string report_to_table(const RunReport& report) {
  std::string out;
  char line[160];
  std::snprintf(line, sizeof line, "%-28s %6s %8s %8s %8s %8s\n", "group", "n", "ObjRec", "RelRec",
                "SGScore", "std");
  out += line;
  auto row = [&](std::string_view name, const GroupStats& s) {
    std::snprintf(line, sizeof line, "%-28.28s %6zu %8s %8s %8s %8s\n", std::string(name).c_str(), s.n,
                  cell(s.mean_or).c_str(), cell(s.mean_rr).c_str(), cell(s.mean_sg).c_str(),
                  cell(s.std_sg).c_str());
    out += line;
  };
  row("Overall", report.overall);
  for (auto level : kLevels) row(to_string(level), report.levels.at(level));
  for (const auto& [name, stats] : report.categories) row(name, stats);
  if (report.failed) out += std::to_string(report.failed) + " sample(s) failed and were excluded\n";
  return out;
}

// ---------------------------------------------------------------------------
// Human study

int machine_choice(std::span<const double, 4> scores) {
  int best = 0;
  for (int i = 1; i < 4; ++i) {
    if (scores[static_cast<std::size_t>(i)] > scores[static_cast<std::size_t>(best)]) best = i;
  }
  return best;
}

int machine_choice(std::span<const EvaluationRecord, 4> candidates) {
  std::array<double, 4> scores{};
  for (std::size_t i = 0; i < 4; ++i) scores[i] = candidates[i].sgscore;
  return machine_choice(std::span<const double, 4>(scores));
}

std::int64_t ConfusionMatrix::total() const {
  std::int64_t sum = 0;
  for (const auto& row : cells) {
    for (auto v : row) sum += v;
  }
  return sum;
}

ConfusionMatrix confusion_matrix(std::span<const ChoicePair> responses,
                                 std::array<std::string, 4> labels) {
  ConfusionMatrix m;
  m.labels = std::move(labels);
  for (std::size_t i = 0; i < responses.size(); ++i) {
    const auto& r = responses[i];
    if (r.human < 0 || r.human > 3 || r.machine < 0 || r.machine > 3) {
      throw StructuralError("response " + std::to_string(i) + ": choice outside 0..3");
    }
    ++m.cells[static_cast<std::size_t>(r.human)][static_cast<std::size_t>(r.machine)];
  }
  return m;
}

}  // namespace scenebench
