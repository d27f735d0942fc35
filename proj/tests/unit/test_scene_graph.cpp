#include <doctest.h>

#include "graph_gen.hpp"
#include "scenebench/errors.hpp"
#include "scenebench/scene_graph.hpp"

using namespace scenebench;

TEST_CASE("object ids split the category at the last dot") {
  auto id = ObjectId::parse("sports ball.1");
  CHECK(id.category() == "sports ball");
  CHECK(id.index() == 1);
  auto dotted = ObjectId::parse("st. bernard.12");
  CHECK(dotted.category() == "st. bernard");
  CHECK(dotted.index() == 12);
  CHECK(ObjectId::make("person", 2).raw() == "person.2");
}

TEST_CASE("object ids reject malformed input") {
  CHECK_THROWS_AS(ObjectId::parse("person"), GrammarError);
  CHECK_THROWS_AS(ObjectId::parse("person."), GrammarError);
  CHECK_THROWS_AS(ObjectId::parse(".3"), GrammarError);
  CHECK_THROWS_AS(ObjectId::parse("person.x"), GrammarError);
}

TEST_CASE("object ids order by category then numeric index") {
  CHECK(ObjectId::parse("person.2") < ObjectId::parse("person.10"));
  CHECK(ObjectId::parse("dog.9") < ObjectId::parse("person.1"));
}

TEST_CASE("parse the worked example and round trip it") {
  const char* text =
      R"({"relationships": [{"source": "person.2", "target": "sports ball.1", "relation": "kicking"},
                            {"source": "person.2", "target": "person.3", "relation": "near"}]})";
  auto parsed = parse_scene_graph(text);
  CHECK(parsed.warnings.empty());
  CHECK(parsed.graph.num_objects() == 3);
  CHECK(parsed.graph.num_edges() == 2);
  auto again = parse_scene_graph(to_annotation_json(parsed.graph));
  CHECK(again.graph == parsed.graph);
}

TEST_CASE("parser errors carry position or edge index") {
  try {
    parse_scene_graph(R"({"relationships": [)");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.byte_offset() > 0);
  }
  try {
    parse_scene_graph(R"({"relationships": [{"source": "a.1", "target": "b.1", "relation": "on"}, {"source": "a.1"}]})");
    FAIL("expected StructuralError");
  } catch (const StructuralError& e) {
    CHECK(std::string(e.what()).find("relationship 1") != std::string::npos);
  }
}

TEST_CASE("declared objects fix the object set") {
  auto rec = testing::example_detections();
  auto parsed = parse_scene_graph(
      R"({"relationships": [{"source": "person.2", "target": "cat.7", "relation": "near"},
                            {"source": "person.2", "target": "person.2", "relation": "near"},
                            {"source": "person.3", "target": "person.2", "relation": "Near "}]})",
      std::span<const DeclaredObject>(rec.objects));
  CHECK(parsed.graph.num_objects() == 3);
  REQUIRE(parsed.graph.num_edges() == 1);
  CHECK(parsed.graph.edges()[0].relation == "near");
  CHECK(parsed.warnings.size() == 2);
}

TEST_CASE("graph constructor enforces structure") {
  SceneGraph::ObjectMap objects{{ObjectId::parse("a.1"), std::nullopt}, {ObjectId::parse("b.1"), std::nullopt}};
  auto a = ObjectId::parse("a.1"), b = ObjectId::parse("b.1"), c = ObjectId::parse("c.1");
  CHECK_THROWS_AS(SceneGraph(objects, {Edge{a, c, "on"}}), StructuralError);
  CHECK_THROWS_AS(SceneGraph(objects, {Edge{a, a, "on"}}), StructuralError);
  CHECK_THROWS_AS(SceneGraph(objects, {Edge{a, b, "  "}}), StructuralError);
  SceneGraph dedup(objects, {Edge{a, b, "On"}, Edge{a, b, "on"}});
  CHECK(dedup.num_edges() == 1);
}

TEST_CASE("triplet serialization lists edges then isolated categories") {
  auto g = testing::example_graph();
  CHECK(serialize_triplets(g) == "person kicking sports ball, person near person");
  SceneGraph lonely({{ObjectId::parse("tree.1"), std::nullopt}}, {});
  CHECK(serialize_triplets(lonely) == "tree");
}

TEST_CASE("object specs parse and format") {
  auto obj = parse_object_spec("sports ball.1:[312, 360, 370, 417]");
  CHECK(obj.id.raw() == "sports ball.1");
  CHECK(obj.box == BoundingBox{312, 360, 370, 417});
  CHECK(format_object_spec(obj) == "sports ball.1:[312, 360, 370, 417]");
  CHECK_THROWS_AS(parse_object_spec("person.1:[5, 5, 2, 9]"), GrammarError);
  CHECK_THROWS_AS(parse_object_spec("person.1 [1, 2, 3, 4]"), GrammarError);
}

TEST_CASE("complexity and levels") {
  auto g = testing::chain_graph(4, 5);
  CHECK(complexity(g, 0.0) == 5.0);
  CHECK(complexity(g, 1.0) == 4.0);
  CHECK(complexity(g, 0.5) == 4.5);
  CHECK_THROWS_AS(complexity(g, 1.5), DomainError);

  CHECK(complexity_level(0) == ComplexityLevel::Simple);
  CHECK(complexity_level(3) == ComplexityLevel::Simple);
  CHECK(complexity_level(3.49) == ComplexityLevel::Simple);
  CHECK(complexity_level(3.5) == ComplexityLevel::Medium);
  CHECK(complexity_level(7) == ComplexityLevel::Medium);
  CHECK(complexity_level(7.5) == ComplexityLevel::Hard);
  CHECK(complexity_level(8) == ComplexityLevel::Hard);
  CHECK_THROWS_AS(complexity_level(-1), DomainError);
  CHECK(complexity_level_from_string("hard") == ComplexityLevel::Hard);
  CHECK(to_string(ComplexityLevel::Medium) == "Medium");
}

TEST_CASE("remove_objects drops incident edges") {
  auto g = testing::example_graph();
  auto id = ObjectId::parse("person.3");
  auto h = remove_objects(g, std::span<const ObjectId>(&id, 1));
  CHECK(h.num_objects() == 2);
  CHECK(h.num_edges() == 1);
  CHECK(h.multiplicity("person") == 1);
}
