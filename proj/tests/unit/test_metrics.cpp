#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "graph_gen.hpp"
#include "oracles.hpp"
#include "scenebench/errors.hpp"
#include "scenebench/metrics.hpp"

using namespace scenebench;

TEST_CASE("sgscore reference rows") {
  CHECK(std::abs(sgscore(0.6493, 0.4419, 0.5) - 0.5456) <= 0.005);
  CHECK(std::abs(sgscore(0.7722, 0.5378, 0.5) - 0.6550) <= 0.005);
  auto printed = format_percent(sgscore(0.7545, 0.4884, 0.5));
  CHECK((printed == "62.14" || printed == "62.15"));
  CHECK(format_percent(0.5456) == "54.56");
}

TEST_CASE("sgscore domain") {
  CHECK(sgscore(1, 0, 1) == 1.0);
  CHECK(sgscore(1, 0, 0) == 0.0);
  CHECK_THROWS_AS(sgscore(1.2, 0.5, 0.5), DomainError);
  CHECK_THROWS_AS(sgscore(0.5, 0.5, -0.1), DomainError);
}

TEST_CASE("format_percent rounds half up") {
  CHECK(format_percent(0.621450) == "62.15");
  CHECK(format_percent(0.12345) == "12.35");
  CHECK(format_percent(1.0) == "100.00");
  CHECK(format_percent(0.0) == "0.00");
}

TEST_CASE("recalls") {
  auto g = testing::example_graph();
  ObjectVerdicts v;
  for (auto id : testing::object_ids(g)) v[id] = id.raw() != "person.3";
  CHECK(object_recall(g, v) == 2.0 / 3.0);
  std::vector<RelationVerdict> rv = {{g.edges()[0], "kicking", true}, {g.edges()[1], "on", false}};
  CHECK(relation_recall(g, rv) == 0.5);
  SceneGraph lonely({{ObjectId::parse("tree.1"), std::nullopt}}, {});
  CHECK(relation_recall(lonely, {}) == 1.0);
  CHECK_THROWS_AS(relation_recall(g, std::span<const RelationVerdict>(rv.data(), 1)), StructuralError);
  CHECK_THROWS_AS(object_recall(SceneGraph{}, {}), DomainError);
}

TEST_CASE("evaluate_sample against a scripted oracle") {
  auto g = testing::example_graph();
  auto vocab = default_relation_vocabulary();
  EvalParams params{0.5, 3, {vocab.begin(), vocab.end()}, 2};

  Judge full(scripted_oracle(g));
  auto perfect = evaluate_sample("x", g, ImageBlob::from_string("img"), full, params);
  CHECK(perfect.sgscore == 1.0);
  CHECK(perfect.abstentions == 0);

  auto removed = ObjectId::parse("sports ball.1");
  Judge partial(scripted_oracle(remove_objects(g, std::span<const ObjectId>(&removed, 1))));
  auto rec = evaluate_sample("x", g, ImageBlob::from_string("img"), partial, params);
  CHECK(rec.object_recall == 2.0 / 3.0);
  CHECK(rec.relation_recall == 0.5);
  CHECK_FALSE(rec.object_verdicts.at(removed));
  CHECK(rec.relation_verdicts[0].chosen_relation == "no visible relationship");
}

TEST_CASE("presence credit goes to instances with a correct edge first") {
  auto tree1 = ObjectId::parse("tree.1"), tree3 = ObjectId::parse("tree.3"), light = ObjectId::parse("traffic light.2");
  SceneGraph gt({{tree1, std::nullopt}, {tree3, std::nullopt}, {light, std::nullopt}}, {{light, tree3, "has"}});
  SceneGraph world({{tree3, std::nullopt}, {light, std::nullopt}}, {{light, tree3, "has"}});
  Judge judge(scripted_oracle(world));
  EvalParams params;
  params.vocab = {"has", "on", "near", "behind"};
  auto rec = evaluate_sample("t", gt, ImageBlob::from_string("img"), judge, params);
  CHECK(rec.object_verdicts.at(tree3));
  CHECK_FALSE(rec.object_verdicts.at(tree1));
  CHECK(rec.relation_verdicts[0].correct);
}

TEST_CASE("records round trip through JSON") {
  auto g = testing::example_graph();
  auto rec = testing::record_with_verdicts(g, {"person.3"}, {true, false});
  rec.sample_id = "weird \"id\"";
  CHECK(record_from_json(record_to_json(rec)) == rec);
  CHECK_THROWS(record_from_json("{\"v\": 99}"));
}

TEST_CASE("aggregate is order independent and buckets by level") {
  std::vector<SceneGraph> graphs = {testing::chain_graph(2, 1), testing::chain_graph(3, 5), testing::chain_graph(4, 9)};
  std::map<std::string, GraphInfo> info;
  std::vector<EvaluationRecord> records;
  for (std::size_t i = 0; i < graphs.size(); ++i) {
    std::vector<bool> ok(graphs[i].num_edges(), true);
    if (i == 1) ok[0] = false;
    auto r = testing::record_with_verdicts(graphs[i], {}, ok);
    r.sample_id = "g" + std::to_string(i);
    info[r.sample_id] = GraphInfo{&graphs[i], i ? std::optional<std::string>("Nature") : std::nullopt};
    records.push_back(r);
  }
  EvaluationRecord failed;
  failed.sample_id = "g9";
  failed.failed = true;
  records.push_back(failed);
  info["g9"] = GraphInfo{&graphs[0], std::nullopt};

  ReportConfig config{0.5, 0.0, 1, "m"};
  auto report = aggregate(records, info, config);
  CHECK(report.overall.n == 3);
  CHECK(report.failed == 1);
  CHECK(report.levels.at(ComplexityLevel::Simple).n == 1);
  CHECK(report.levels.at(ComplexityLevel::Medium).n == 1);
  CHECK(report.levels.at(ComplexityLevel::Hard).n == 1);
  CHECK(report.categories.at("Nature").n == 2);

  std::reverse(records.begin(), records.end());
  auto again = aggregate(records, info, config);
  CHECK(report_to_json(again) == report_to_json(report));
  CHECK(report_to_csv(again) == report_to_csv(report));

  records.push_back(records.front());
  CHECK_THROWS_AS(aggregate(records, info, config), StructuralError);
}

TEST_CASE("machine choice and confusion matrix") {
  std::array<double, 4> scores = {0.2, 0.7, 0.7, 0.1};
  CHECK(machine_choice(std::span<const double, 4>(scores)) == 1);
  std::vector<ChoicePair> pairs = {{0, 0}, {1, 1}, {1, 2}, {3, 1}};
  auto m = confusion_matrix(pairs);
  CHECK(m.total() == 4);
  CHECK(m.cells[1][2] == 1);
  std::vector<ChoicePair> bad = {{4, 0}};
  CHECK_THROWS_AS(confusion_matrix(bad), StructuralError);
  CHECK(confusion_matrix({}).total() == 0);
}
