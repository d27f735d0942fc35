#include "scenebench/simulation.hpp"

#include <set>

#include "scenebench/errors.hpp"
#include "scenebench/judge.hpp"

namespace scenebench {

ImageBlob encode_fact_image(const SceneGraph& facts) {
  return ImageBlob::from_string(to_annotation_json(facts));
}

std::optional<SceneGraph> decode_fact_image(const ImageBlob& image) {
  if (image.empty() || image.as_string().front() != '{') return std::nullopt;
  try {
    return parse_scene_graph(image.as_string()).graph;
  } catch (const Error&) {
    return std::nullopt;
  }
}

std::vector<std::string> prompt_phrases(std::string_view prompt) {
  constexpr std::string_view kFrame = "A realistic photo of ";
  if (prompt.starts_with(kFrame)) prompt.remove_prefix(kFrame.size());
  if (prompt.ends_with(".")) prompt.remove_suffix(1);
  std::vector<std::string> out;
  while (!prompt.empty()) {
    auto comma = prompt.find(", ");
    out.emplace_back(prompt.substr(0, comma));
    if (comma == std::string_view::npos) break;
    prompt.remove_prefix(comma + 2);
  }
  return out;
}

FactSetGenerator::FactSetGenerator(SceneGraph ground_truth, int capacity)
    : gt_(std::move(ground_truth)), capacity_(capacity) {
  if (capacity_ < 1) throw ConfigError("fact-set generator capacity must be >= 1");
}

ImageBlob FactSetGenerator::generate(const GenerationRequest& request) {
  request.validate();
  std::set<ObjectId> objects;
  std::vector<Edge> edges;

  auto phrases = prompt_phrases(request.prompt);
  if (phrases.size() > static_cast<std::size_t>(capacity_)) phrases.resize(static_cast<std::size_t>(capacity_));
  for (const auto& phrase : phrases) {
    for (const auto& e : gt_.edges()) {
      if (e.source.category() + " " + e.relation + " " + e.target.category() == phrase) {
        edges.push_back(e);
        objects.insert(e.source);
        objects.insert(e.target);
      }
    }
    for (const auto& [id, box] : gt_.objects()) {
      if (id.category() == phrase) objects.insert(id);
    }
  }
  for (const auto& ref : request.references) {
    if (ref.weight <= 0.0) continue;
    if (auto facts = decode_fact_image(ref.image)) {
      for (const auto& [id, box] : facts->objects()) objects.insert(id);
      edges.insert(edges.end(), facts->edges().begin(), facts->edges().end());
    }
  }

  SceneGraph::ObjectMap map;
  for (const auto& id : objects) {
    auto it = gt_.objects().find(id);
    map.emplace(id, it != gt_.objects().end() ? it->second : std::nullopt);
  }
  return encode_fact_image(SceneGraph(std::move(map), std::move(edges)));
}

std::string FactSetJudge::complete(const ChatRequest& request) {
  if (!request.question) {
    throw BackendError("fact-set judge only answers structured judge questions", false);
  }
  SceneGraph world = request.image ? decode_fact_image(*request.image).value_or(SceneGraph{}) : SceneGraph{};
  return oracle_reply(world, *request.question);
}

}  // namespace scenebench
