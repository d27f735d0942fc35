#include <doctest.h>

#include <set>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "fixtures.hpp"
#include "scenebench/dataset.hpp"
#include "scenebench/errors.hpp"
#include "scenebench/study.hpp"

using namespace scenebench;
using nlohmann::json;

namespace {

const std::array<std::string, 4> kModels = {"ModelAlpha", "ModelBeta", "ModelGamma", "ModelDelta"};

std::string tasks_json(int n) {
  json tasks = json::array();
  for (int i = 0; i < n; ++i) {
    std::string id = "t" + std::to_string(i);
    tasks.push_back({{"task_id", id},
                     {"original", "orig/" + id + ".png"},
                     {"candidates", {"ModelAlpha/" + id + ".png", "ModelBeta/" + id + ".png",
                                     "ModelGamma/" + id + ".png", "ModelDelta/" + id + ".png"}},
                     {"sgscores", {0.1 * (i % 4), 0.5, 0.2, 0.3}}});
  }
  return json{{"models", kModels}, {"seed", 3}, {"images_root", "img"}, {"tasks", tasks}}.dump();
}

void write_images(const std::filesystem::path& root, int n) {
  for (int i = 0; i < n; ++i) {
    std::string id = "t" + std::to_string(i);
    write_text_file(root / "orig" / (id + ".png"), "original " + id);
    for (const auto& m : kModels) write_text_file(root / m / (id + ".png"), m + " " + id);
  }
}

bool leaks_model(const std::string& payload) {
  for (const auto& m : kModels) {
    if (payload.find(m) != std::string::npos) return true;
  }
  return false;
}

}  // namespace

TEST_CASE("display order inversion") {
  std::array<int, 4> order = {3, 0, 1, 2};
  CHECK(resolve_choice(order, 2) == 1);
  CHECK(resolve_choice(order, 0) == 3);
  CHECK_THROWS_AS(resolve_choice(order, 4), DomainError);
}

TEST_CASE("display orders are seeded permutations") {
  auto a = study_display_order(3, "t1");
  CHECK(a == study_display_order(3, "t1"));
  auto sorted = a;
  std::sort(sorted.begin(), sorted.end());
  CHECK(sorted == std::array<int, 4>{0, 1, 2, 3});
  std::set<std::array<int, 4>> distinct;
  for (int i = 0; i < 40; ++i) distinct.insert(study_display_order(3, "t" + std::to_string(i)));
  CHECK(distinct.size() > 5);
}

TEST_CASE("tasks file validation") {
  CHECK_THROWS_AS(parse_study_spec(R"({"tasks": [{"task_id": "a", "original": "o", "candidates": ["x"]}]})"),
                  StructuralError);
  CHECK_THROWS_AS(parse_study_spec(R"({"tasks": [{"task_id": "a", "original": "o", "candidates": ["1","2","3","4"]},
                                                {"task_id": "a", "original": "o", "candidates": ["1","2","3","4"]}]})"),
                  StructuralError);
  CHECK_THROWS_AS(parse_study_spec("{"), ParseError);
}

TEST_CASE("study state assigns in order, rejects duplicates and persists") {
  testing::TempDir dir;
  auto path = dir / "study_responses.jsonl";
  {
    StudyState state(parse_study_spec(tasks_json(3), dir.path()), path);
    auto next = json::parse(state.next_task_json("ann"));
    CHECK(next["task_id"] == "t0");
    CHECK(next["progress"]["answered"] == 0);
    CHECK(next["progress"]["total"] == 3);
    CHECK(state.submit("t0", "ann", 2).first == SubmitStatus::Accepted);
    CHECK(state.submit("t0", "ann", 1).first == SubmitStatus::Duplicate);
    CHECK(state.submit("zzz", "ann", 1).first == SubmitStatus::UnknownTask);
    CHECK(state.submit("t1", "ann", 7).first == SubmitStatus::InvalidChoice);
    CHECK(json::parse(state.next_task_json("ann"))["task_id"] == "t1");
    CHECK(json::parse(state.next_task_json("other"))["task_id"] == "t0");
    auto r = state.responses()[0];
    CHECK(r.resolved_choice == state.spec().tasks[0].display_order[2]);
  }
  StudyState reloaded(parse_study_spec(tasks_json(3), dir.path()), path);
  CHECK(reloaded.responses().size() == 1);
  CHECK(reloaded.submit("t0", "ann", 0).first == SubmitStatus::Duplicate);
}

TEST_CASE("export with no responses is an all-zero matrix") {
  testing::TempDir dir;
  StudyState state(parse_study_spec(tasks_json(2), dir.path()), dir / "r.jsonl");
  auto doc = json::parse(state.export_json());
  CHECK(doc["responses"].empty());
  CHECK(doc["confusion"]["total"] == 0);
  for (const auto& row : doc["confusion"]["cells"]) {
    for (const auto& v : row) CHECK(v == 0);
  }
}

TEST_CASE("two annotators over HTTP never lose a response or see model names") {
  testing::TempDir dir;
  write_images(dir / "img", 6);
  auto state = std::make_shared<StudyState>(parse_study_spec(tasks_json(6), dir.path()), dir / "study_responses.jsonl");
  StudyServer server(state);
  int port = server.start();

  std::vector<std::string> payloads;
  std::mutex payload_mutex;
  auto annotate = [&](const std::string& who) {
    httplib::Client client("127.0.0.1", port);
    for (;;) {
      auto res = client.Get("/api/tasks/next?annotator=" + who);
      REQUIRE(res);
      json task = json::parse(res->body);
      {
        std::lock_guard lock(payload_mutex);
        payloads.push_back(res->body);
      }
      if (task["done"]) break;
      for (const auto& url : task["candidate_urls"]) {
        auto img = client.Get(url.get<std::string>());
        REQUIRE(img);
        CHECK(img->status == 200);
      }
      json body = {{"task_id", task["task_id"]}, {"annotator_id", who}, {"displayed_choice", 2}};
      auto post = client.Post("/api/responses", body.dump(), "application/json");
      REQUIRE(post);
      CHECK(post->status == 201);
      std::lock_guard lock(payload_mutex);
      payloads.push_back(post->body);
    }
  };
  std::thread a(annotate, "alice");
  std::thread b(annotate, "bob");
  a.join();
  b.join();

  httplib::Client client("127.0.0.1", port);
  json dup = {{"task_id", "t0"}, {"annotator_id", "alice"}, {"displayed_choice", 1}};
  CHECK(client.Post("/api/responses", dup.dump(), "application/json")->status == 409);
  CHECK(client.Post("/api/responses", "nope", "application/json")->status == 400);
  CHECK(client.Get("/api/tasks/next")->status == 400);
  CHECK(client.Get("/api/images/t0/9")->status == 404);

  auto exported = client.Get("/api/export");
  REQUIRE(exported);
  payloads.push_back(exported->body);
  json doc = json::parse(exported->body);
  CHECK(doc["responses"].size() == 12);
  CHECK(doc["confusion"]["total"] == 12);
  for (const auto& p : payloads) CHECK_FALSE(leaks_model(p));

  CHECK(read_lines(dir / "study_responses.jsonl").size() == 12);
  server.stop();

  auto labeled = study_confusion(state->spec(), state->responses());
  CHECK(labeled.labels[0] == "ModelAlpha");
  CHECK(labeled.total() == 12);
}
