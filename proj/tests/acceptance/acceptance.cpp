// Acceptance checks: one PASS/FAIL line per criterion, tolerances pinned below.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <set>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "fixtures.hpp"
#include "graph_gen.hpp"
#include "oracles.hpp"
#include "scenebench/annotate.hpp"
#include "scenebench/attention.hpp"
#include "scenebench/dataset.hpp"
#include "scenebench/eval_runner.hpp"
#include "scenebench/feedback.hpp"
#include "scenebench/metrics.hpp"
#include "scenebench/questions.hpp"
#include "scenebench/simulation.hpp"
#include "scenebench/study.hpp"

using namespace scenebench;
using nlohmann::json;

namespace {

constexpr double kScoreTolerance = 0.005;
constexpr double kRowSumTolerance = 1e-9;
constexpr double kFiniteDifferenceTolerance = 1e-6;
constexpr double kNaiveTolerance = 1e-12;

struct Outcome {
  bool passed = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok && passed) {
      passed = false;
      detail.str("");
      detail << what;
    }
  }
};

int failures = 0;

void check(const std::string& name, const std::function<void(Outcome&)>& body) {
  Outcome out;
  auto start = std::chrono::steady_clock::now();
  try {
    body(out);
  } catch (const std::exception& e) {
    out.passed = false;
    out.detail.str("");
    out.detail << "exception: " << e.what();
  }
  auto ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  if (!out.passed) ++failures;
  std::printf("%s %s (%s; %.0f ms)\n", out.passed ? "PASS" : "FAIL", name.c_str(), out.detail.str().c_str(), ms);
  std::fflush(stdout);
}

std::vector<std::string> vocab() {
  auto v = default_relation_vocabulary();
  return {v.begin(), v.end()};
}

std::set<testing::Triple> triples_of(const SceneGraph& g) {
  std::set<testing::Triple> out;
  for (const auto& e : g.edges()) out.insert({e.source.raw(), e.relation, e.target.raw()});
  return out;
}

// ---------------------------------------------------------------------------

void score_arithmetic(Outcome& out) {
  struct Row {
    double object_recall, relation_recall, expected;
  };
  const Row rows[] = {{0.6493, 0.4419, 0.5456}, {0.7722, 0.5378, 0.6550}};
  double worst = 0.0;
  for (const auto& r : rows) {
    double sg = sgscore(r.object_recall, r.relation_recall, 0.5);
    worst = std::max(worst, std::abs(sg - r.expected));
    out.require(std::abs(sg - r.expected) <= kScoreTolerance, "score off for " + std::to_string(r.expected));
  }
  auto pct = format_percent(sgscore(0.7545, 0.4884, 0.5));
  out.require(pct == "62.14" || pct == "62.15", "formatted " + pct);
  out.require(sgscore(0.3, 0.9, 1.0) == 0.3 && sgscore(0.3, 0.9, 0.0) == 0.9, "alpha endpoints");
  if (out.passed) out.detail << "max |err| " << worst << " <= " << kScoreTolerance << ", third row " << pct;
}

void oracle_completeness(Outcome& out) {
  Rng rng(2024);
  auto rels = vocab();
  int graphs = 0;
  for (; graphs < 500; ++graphs) {
    auto g = testing::random_graph(rng, {1, 12, 15}, rels);
    Judge judge(scripted_oracle(g));
    EvalParams params;
    params.seed = static_cast<std::uint64_t>(graphs);
    params.vocab = rels;
    auto rec = evaluate_sample("g" + std::to_string(graphs), g, ImageBlob::from_string("img"), judge, params);
    out.require(!rec.failed && rec.object_recall == 1.0 && rec.relation_recall == 1.0 && rec.sgscore == 1.0,
                "graph " + std::to_string(graphs) + " scored " + std::to_string(rec.sgscore));
    if (!out.passed) return;
  }
  out.detail << graphs << " random graphs (1-12 objects, 0-15 edges) score exactly 1.0";
}

void deletion_sensitivity(Outcome& out) {
  Rng rng(77);
  auto rels = vocab();
  int cases = 0;
  for (int t = 0; t < 200; ++t) {
    auto g = testing::random_graph(rng, {2, 10, 12}, rels);
    auto ids = testing::object_ids(g);
    std::vector<ObjectId> shuffled = ids;
    shuffle(std::span<ObjectId>(shuffled), rng);
    std::size_t k = 1 + rng.below(ids.size() - 1);
    std::vector<ObjectId> removed(shuffled.begin(), shuffled.begin() + static_cast<std::ptrdiff_t>(k));
    std::set<ObjectId> removed_set(removed.begin(), removed.end());
    // Keep the surviving instances numbered first so presence crediting lands
    // on the surviving ids.
    bool low_ids_survive = true;
    for (const auto& id : ids) {
      if (removed_set.contains(id)) continue;
      for (const auto& r : removed) {
        if (r.category() == id.category() && r.index() < id.index()) low_ids_survive = false;
      }
    }
    if (!low_ids_survive) continue;
    ++cases;
    auto world = remove_objects(g, removed);
    Judge judge(scripted_oracle(world));
    EvalParams params;
    params.vocab = rels;
    params.seed = static_cast<std::uint64_t>(t);
    auto rec = evaluate_sample("d", g, ImageBlob::from_string("img"), judge, params);
    double expected_or = static_cast<double>(ids.size() - k) / static_cast<double>(ids.size());
    out.require(rec.object_recall == expected_or, "object recall " + std::to_string(rec.object_recall) +
                                                      " != " + std::to_string(expected_or));
    for (const auto& v : rec.relation_verdicts) {
      bool incident = removed_set.contains(v.edge.source) || removed_set.contains(v.edge.target);
      if (incident) {
        out.require(!v.correct && v.chosen_relation == kNoVisibleRelationship,
                    "incident edge credited: " + v.edge.source.raw() + " " + v.edge.relation);
      } else {
        out.require(v.correct, "surviving edge marked wrong: " + v.edge.source.raw() + " " + v.edge.relation);
      }
    }
    if (!out.passed) return;
  }
  out.detail << cases << " deletions: recall exactly (n-k)/n, incident edges answered '"
             << kNoVisibleRelationship << "'";
}

void complexity_buckets(Outcome& out) {
  for (int e = 0; e <= 20; ++e) {
    auto g = testing::chain_graph(6, e);
    auto level = complexity_level(complexity(g, 0.0));
    auto expected = e <= 3 ? ComplexityLevel::Simple : e <= 7 ? ComplexityLevel::Medium : ComplexityLevel::Hard;
    out.require(level == expected, "|E|=" + std::to_string(e) + " bucketed " + std::string(to_string(level)));
  }
  out.require(complexity_level(3.4) == ComplexityLevel::Simple && complexity_level(3.5) == ComplexityLevel::Medium &&
                  complexity_level(7.5) == ComplexityLevel::Hard,
              "gap rounding");
  std::vector<SceneGraph> data;
  for (int e : {1, 2, 3, 4, 5, 6, 8, 9, 10, 2}) data.push_back(testing::chain_graph(5, e));
  LevelQuotas quotas = {{ComplexityLevel::Simple, 2}, {ComplexityLevel::Medium, 2}, {ComplexityLevel::Hard, 1}};
  auto a = balanced_sample(data, 0.0, quotas, 17);
  out.require(a == balanced_sample(data, 0.0, quotas, 17), "sample not reproducible");
  std::map<ComplexityLevel, std::size_t> counts;
  for (auto i : a) ++counts[complexity_level(complexity(data[i], 0.0))];
  out.require(counts == LevelQuotas(quotas), "per-level counts differ from quotas");
  if (out.passed) out.detail << "gamma=0 buckets for |E| 0..20 correct, {2,2,1} sample reproducible";
}

void feedback_monotonicity(Outcome& out) {
  Rng rng(99);
  auto rels = vocab();
  int converged = 0;
  for (int t = 0; t < 100; ++t) {
    auto g = testing::random_graph(rng, {1, 8, 10}, rels);
    FactSetGenerator gen(g, 1);
    Judge judge(std::make_shared<FactSetJudge>());
    FeedbackParams params;
    params.vocab = rels;
    params.seed = static_cast<std::uint64_t>(t);
    params.max_iterations = static_cast<int>(g.num_objects() + g.num_edges());
    auto result = run_feedback("f" + std::to_string(t), g, gen, judge, params);
    out.require(!result.failed, "run failed: " + result.error);
    if (!out.passed) return;
    for (std::size_t i = 1; i < result.iterations.size(); ++i) {
      out.require(result.iterations[i].record.sgscore >= result.iterations[i - 1].record.sgscore,
                  "score dropped in sample " + std::to_string(t));
    }
    out.require(result.generation_calls <= 1 + 2 * static_cast<std::size_t>(params.max_iterations),
                "generation budget exceeded");
    out.require(result.final_iteration()->record.sgscore == 1.0, "sample " + std::to_string(t) + " ended at " +
                                                                     std::to_string(result.final_iteration()->record.sgscore));
    if (!out.passed) return;
    ++converged;
  }
  out.detail << converged << "/100 samples non-decreasing and reach 1.0 within |V|+|E| iterations";
}

void missing_graph_bruteforce(Outcome& out) {
  const std::vector<std::string> relations = {"near", "on"};
  std::size_t checked = 0;
  for (int n = 1; n <= 4; ++n) {
    SceneGraph::ObjectMap objects;
    std::vector<ObjectId> ids;
    for (int i = 1; i <= n; ++i) {
      // Two categories so instance ids of both kinds appear.
      ids.push_back(ObjectId::make(i % 2 ? "dog" : "sports ball", (i + 1) / 2));
      objects.emplace(ids.back(), std::nullopt);
    }
    std::vector<Edge> candidates;
    const auto& rels = n == 4 ? std::vector<std::string>{"near"} : relations;
    for (const auto& s : ids) {
      for (const auto& t : ids) {
        if (s == t) continue;
        for (const auto& r : rels) candidates.push_back({s, t, r});
      }
    }
    const std::size_t m = candidates.size();
    // Every edge subset of size <= 4, via combinations of increasing indices.
    std::vector<std::size_t> pick;
    std::function<void(std::size_t)> visit = [&](std::size_t from) {
      std::vector<Edge> edges;
      for (auto i : pick) edges.push_back(candidates[i]);
      SceneGraph g(objects, edges);
      for (unsigned miss = 0; miss < (1u << n); ++miss) {
        std::set<std::string> missing;
        for (int i = 0; i < n; ++i) {
          if (miss & (1u << i)) missing.insert(ids[static_cast<std::size_t>(i)].raw());
        }
        for (unsigned ok = 0; ok < (1u << edges.size()); ++ok) {
          std::vector<bool> correct;
          for (std::size_t e = 0; e < edges.size(); ++e) correct.push_back(((ok >> e) & 1u) != 0);
          auto got = build_missing_graph(g, testing::record_with_verdicts(g, missing, correct));
          auto want = testing::expected_missing(g, missing, correct);
          std::set<std::string> nodes;
          for (const auto& [id, box] : got.graph.objects()) nodes.insert(id.raw());
          if (nodes != want.nodes || triples_of(got.graph) != want.edges) {
            out.require(false, "mismatch on " + to_annotation_json(g) + " with " + std::to_string(missing.size()) +
                                   " missing objects, verdict mask " + std::to_string(ok));
            return;
          }
          ++checked;
        }
      }
      if (pick.size() == 4) return;
      for (std::size_t i = from; i < m && out.passed; ++i) {
        pick.push_back(i);
        visit(i + 1);
        pick.pop_back();
      }
    };
    visit(0);
    if (!out.passed) return;
  }
  out.detail << checked << " (graph, verdict) combinations with <= 4 objects and <= 4 edges match";
}

attn::KeyValue kv(std::size_t m, std::size_t d, std::size_t dv, std::uint64_t seed) {
  return {attn::random_matrix(m, d, seed), attn::random_matrix(m, dv, seed + 1)};
}

void attention_properties(Outcome& out) {
  double worst_naive = 0.0, worst_row = 0.0, worst_fd = 0.0;
  std::uint64_t seed = 1;
  for (std::size_t n = 1; n <= 8; ++n) {
    for (std::size_t d = 1; d <= 8; ++d) {
      const std::size_t m = 1 + (n + d) % 8, dv = 1 + (n * d) % 8;
      attn::MergeInputs in{attn::random_matrix(n, d, seed), kv(m, d, dv, seed + 10), kv(m + 1, d, dv, seed + 20),
                           kv(m + 2, d, dv, seed + 30), 0.0, 0.0};
      seed += 100;
      out.require(attn::merged_attention(in) == attn::attention(in.query, in.prompt.keys, in.prompt.values),
                  "lambda=0 not bit-exact");

      auto w = attn::attention_weights(in.query, in.prompt.keys);
      for (std::size_t r = 0; r < w.rows(); ++r) {
        double sum = 0.0;
        for (double x : w.row(r)) sum += x;
        worst_row = std::max(worst_row, std::abs(sum - 1.0));
      }

      in.lambda0 = 0.3;
      in.lambda1 = 0.7;
      worst_naive = std::max(worst_naive, testing::max_abs_diff(testing::to_dense(attn::merged_attention(in)),
                                                                testing::naive_merged(in)));

      // dZ/dlambda0 is the initial-image attention term.
      const double h = 1e-4;
      auto base = testing::to_dense(attn::merged_attention(in));
      in.lambda0 += h;
      auto bumped = testing::to_dense(attn::merged_attention(in));
      in.lambda0 -= h;
      auto term = testing::naive_attention(testing::to_dense(in.query), testing::to_dense(in.initial_image.keys),
                                           testing::to_dense(in.initial_image.values));
      for (std::size_t i = 0; i < base.size(); ++i) {
        for (std::size_t c = 0; c < base[i].size(); ++c) {
          worst_fd = std::max(worst_fd, std::abs((bumped[i][c] - base[i][c]) / h - term[i][c]));
        }
      }
    }
  }
  out.require(worst_row <= kRowSumTolerance, "row sum error " + std::to_string(worst_row));
  out.require(worst_fd <= kFiniteDifferenceTolerance, "finite difference error " + std::to_string(worst_fd));
  out.require(worst_naive <= kNaiveTolerance, "naive disagreement " + std::to_string(worst_naive));
  if (out.passed) {
    out.detail << "lambda=0 bit-exact; row sums " << worst_row << ", finite difference " << worst_fd
               << ", naive " << worst_naive << " up to 8x8";
  }
}

void parser_and_prompt(Outcome& out) {
  const std::filesystem::path fixtures(SCENEBENCH_FIXTURE_DIR);
  auto g = testing::example_graph();
  out.require(parse_scene_graph(to_annotation_json(g)).graph == g, "annotation JSON round trip");
  // The worked example lists relationships only, so objects come back without boxes.
  auto parsed = parse_scene_graph(read_text_file(fixtures / "example_scene_graph.json")).graph;
  out.require(parsed.edges() == g.edges(), "worked example edges");
  out.require(testing::object_ids(parsed) == testing::object_ids(g), "worked example objects");
  out.require(serialize_triplets(g) == "person kicking sports ball, person near person", "triplet serialization");
  out.require(build_annotation_prompt(testing::example_detections()) ==
                  read_text_file(fixtures / "annotation_prompt.txt"),
              "annotation prompt differs from the template");
  if (out.passed) out.detail << "example round trips; annotation prompt byte-exact";
}

void resume_determinism(Outcome& out) {
  testing::TempDir dir;
  auto entries = testing::write_fact_fixture(dir.path(), 20, 8);
  auto options_for = [&](const std::filesystem::path& output) {
    EvalRunOptions o;
    o.vocab = vocab();
    o.seed = 5;
    o.concurrency = 4;
    o.images_dir = dir / "images";
    o.output_dir = output;
    return o;
  };

  auto backend = std::make_shared<testing::CountingBackend>(std::make_shared<FactSetJudge>());
  Judge judge(backend);
  std::stop_source stop;
  auto first_options = options_for(dir / "resumed");
  first_options.stop = stop.get_token();
  int seen = 0;
  first_options.on_record = [&](const EvaluationRecord&) {
    if (++seen == 7) stop.request_stop();
  };
  auto first = run_eval(entries, judge, first_options);
  out.require(first.interrupted, "first run was not interrupted");

  auto resume_options = options_for(dir / "resumed");
  resume_options.resume = true;
  auto second = run_eval(entries, judge, resume_options);
  out.require(second.exit_code() == kExitOk, "resumed run exit " + std::to_string(second.exit_code()));
  out.require(backend->duplicate_calls() == 0,
              std::to_string(backend->duplicate_calls()) + " duplicate judge calls after resume");

  Judge straight(std::make_shared<FactSetJudge>());
  run_eval(entries, straight, options_for(dir / "straight"));
  out.require(read_text_file(dir / "resumed" / "report.json") == read_text_file(dir / "straight" / "report.json"),
              "report.json differs");
  out.require(read_text_file(dir / "resumed" / "report.csv") == read_text_file(dir / "straight" / "report.csv"),
              "report.csv differs");
  if (out.passed) {
    out.detail << "20 samples, interrupted after " << first.evaluated << ", resumed " << second.evaluated
               << "; reports byte-identical, 0 duplicate calls";
  }
}

void study_flow(Outcome& out) {
  const std::array<std::string, 4> models = {"ModelAlpha", "ModelBeta", "ModelGamma", "ModelDelta"};
  testing::TempDir dir;
  json tasks = json::array();
  for (int i = 0; i < 6; ++i) {
    std::string id = "t" + std::to_string(i);
    json candidates = json::array();
    for (const auto& m : models) {
      write_text_file(dir / "img" / m / (id + ".png"), m);
      candidates.push_back(m + "/" + id + ".png");
    }
    write_text_file(dir / "img" / (id + ".png"), "original");
    tasks.push_back({{"task_id", id}, {"original", id + ".png"}, {"candidates", candidates},
                     {"sgscores", {0.4, 0.9, 0.1, 0.2}}});
  }
  json doc = {{"models", models}, {"seed", 11}, {"images_root", "img"}, {"tasks", tasks}};
  auto state = std::make_shared<StudyState>(parse_study_spec(doc.dump(), dir.path()),
                                            dir / "study_responses.jsonl");
  StudyServer server(state);
  int port = server.start();

  std::vector<std::string> payloads;
  std::mutex mutex;
  auto annotator = [&](const std::string& who) {
    httplib::Client client("127.0.0.1", port);
    for (int guard = 0; guard < 20; ++guard) {
      auto next = client.Get("/api/tasks/next?annotator=" + who);
      if (!next) return;
      auto task = json::parse(next->body);
      std::lock_guard lock(mutex);
      payloads.push_back(next->body);
      if (task["done"]) return;
      json body = {{"task_id", task["task_id"]}, {"annotator_id", who}, {"displayed_choice", guard % 4}};
      auto posted = client.Post("/api/responses", body.dump(), "application/json");
      if (posted) payloads.push_back(posted->body);
    }
  };
  std::thread a(annotator, "a1"), b(annotator, "a2");
  a.join();
  b.join();
  httplib::Client client("127.0.0.1", port);
  auto exported = client.Get("/api/export");
  server.stop();
  out.require(exported && exported->status == 200, "export failed");
  if (!out.passed) return;
  payloads.push_back(exported->body);
  auto ex = json::parse(exported->body);
  out.require(ex["responses"].size() == 12, "responses " + std::to_string(ex["responses"].size()));
  out.require(ex["confusion"]["total"] == 12, "matrix does not sum to 12");
  for (const auto& p : payloads) {
    for (const auto& m : models) out.require(p.find(m) == std::string::npos, "payload leaks model id " + m);
  }
  if (out.passed) out.detail << "6 tasks x 2 annotators: 12 responses, matrix sum 12, no model ids over HTTP";
}

}  // namespace

int main() {
  check("score-arithmetic", score_arithmetic);
  check("oracle-completeness", oracle_completeness);
  check("deletion-sensitivity", deletion_sensitivity);
  check("complexity-buckets", complexity_buckets);
  check("feedback-monotonicity", feedback_monotonicity);
  check("missing-graph-bruteforce", missing_graph_bruteforce);
  check("attention-properties", attention_properties);
  check("parser-and-prompt", parser_and_prompt);
  check("resume-determinism", resume_determinism);
  check("study-flow", study_flow);
  std::printf("%s: %d failing\n", failures ? "FAIL" : "PASS", failures);
  return failures ? 1 : 0;
}
