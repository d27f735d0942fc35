#include "scenebench/annotate.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <filesystem>
#include <set>

#include <json.hpp>

#include "scenebench/errors.hpp"
#include "scenebench/parallel.hpp"
#include "scenebench/rng.hpp"

namespace scenebench {

using nlohmann::json;

namespace {

constexpr std::string_view kAnnotationTemplate =
    R"PROMPT(Given a set of detected objects in an image, each object is characterized by a name, a bounding box in "(xmin, ymin, xmax, ymax)" format. Please generate a scene graph to describe this image. The scene graph should describe relationships in the format "source -> relation -> target". Example Output:
{"relationships": [{"source": "object_id1", "target": "object_id2", "relation":
"relation_type"}, ... ]}
 Now, objects are {OBJECTS}. The original width and height of the provided image are {IMG_WH}. Please output the scene graph in JSON style without any comments.)PROMPT";

constexpr std::string_view kDiversityTemplate =
    R"PROMPT(Now, we have a list of image information like {IMAGE_INFO} , where each image information contains "xyxy" bounding boxes and "relationships" depicting the relation between the "source" object and the "target" object. Please classify the scene in **each image** using the following hierarchy:
Level 1:
- People-Centric,
- Non-People Centric.
Level 2:
If People-Centric: [Choose one: Social Interaction, Individual Activities, Work/Occupation, Travel/Exploration, Sports & Recreation, Performance/Entertainment, Daily Life];
If Non-People Centric: [Choose one: Nature, Urban/Built, Objects, Abstract/Artistic].
Please provide the classification for each image in the list, and present your answer as a **JSON-formatted** list of dictionaries, where each dictionary corresponds to an image and contains the following keys: "image_id", "file_name", "level 1", "level 2".)PROMPT";

constexpr std::array<std::string_view, 7> kPeopleCentric = {
    "Social Interaction", "Individual Activities",     "Work/Occupation", "Travel/Exploration",
    "Sports & Recreation", "Performance/Entertainment", "Daily Life"};
constexpr std::array<std::string_view, 4> kNonPeopleCentric = {"Nature", "Urban/Built", "Objects",
                                                               "Abstract/Artistic"};

std::string replace_once(std::string_view text, std::string_view token, std::string_view value) {
  std::string out(text);
  auto pos = out.find(token);
  if (pos != std::string::npos) out.replace(pos, token.size(), value);
  return out;
}

/// Lowercase with whitespace, hyphens and underscores removed.
std::string squash(std::string_view s) {
  std::string out;
  for (unsigned char c : s) {
    if (std::isspace(c) || c == '-' || c == '_') continue;
    out.push_back(static_cast<char>(std::tolower(c)));
  }
  return out;
}

std::string python_repr(std::string_view s) {
  char quote = (s.find('\'') != std::string_view::npos && s.find('"') == std::string_view::npos) ? '"' : '\'';
  std::string out(1, quote);
  for (char c : s) {
    if (c == quote || c == '\\') out.push_back('\\');
    out.push_back(c);
  }
  out.push_back(quote);
  return out;
}

/// Slice between the first `open` and the last `close`, after dropping
/// markdown code fences.
std::string_view extract_json(std::string_view reply, char open, char close) {
  auto first = reply.find(open);
  auto last = reply.rfind(close);
  if (first == std::string_view::npos || last == std::string_view::npos || last < first) return {};
  return reply.substr(first, last - first + 1);
}

std::string json_string(const json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_null()) return "";
  return v.dump();
}

}  // namespace

// ---------------------------------------------------------------------------

void DetectionRecord::validate() const {
  std::set<ObjectId> seen;
  for (const auto& obj : objects) {
    if (!seen.insert(obj.id).second) {
      throw StructuralError(image_ref + ": duplicate object id " + obj.id.raw());
    }
    if (obj.box.xmax > image_wh.width || obj.box.ymax > image_wh.height) {
      throw StructuralError(image_ref + ": box of " + obj.id.raw() + " exceeds image size " +
                            std::to_string(image_wh.width) + "x" + std::to_string(image_wh.height));
    }
  }
}

std::string format_object_list(std::span<const DeclaredObject> objects) {
  std::string out = "[";
  for (std::size_t i = 0; i < objects.size(); ++i) {
    if (i) out += ", ";
    out += python_repr(format_object_spec(objects[i]));
  }
  return out + "]";
}

std::string build_annotation_prompt(const DetectionRecord& record) {
  if (record.objects.empty()) {
    throw DomainError("annotation prompt for " + record.image_ref + " needs at least one object");
  }
  record.validate();
  std::string wh = "(" + std::to_string(record.image_wh.width) + ", " + std::to_string(record.image_wh.height) + ")";
  return replace_once(replace_once(kAnnotationTemplate, "{OBJECTS}", format_object_list(record.objects)),
                      "{IMG_WH}", wh);
}

AnnotationCheck validate_annotation(const SceneGraph& reply_graph, const DetectionRecord& record) {
  AnnotationCheck out;
  SceneGraph::ObjectMap objects;
  for (const auto& obj : record.objects) objects.emplace(obj.id, obj.box);

  std::vector<Edge> edges;
  for (std::size_t i = 0; i < reply_graph.edges().size(); ++i) {
    Edge e = reply_graph.edges()[i];
    if (!objects.contains(e.source) || !objects.contains(e.target)) {
      out.warnings.push_back("edge " + std::to_string(i) + " (" + e.source.raw() + " " + e.relation + " " +
                             e.target.raw() + ") references an undeclared object; dropped");
      continue;
    }
    if (e.source == e.target) {
      out.warnings.push_back("edge " + std::to_string(i) + " is a self-loop; dropped");
      continue;
    }
    e.relation = canonical_relation(e.relation);
    if (e.relation.empty()) {
      out.warnings.push_back("edge " + std::to_string(i) + " has an empty relation; dropped");
      continue;
    }
    edges.push_back(std::move(e));
  }
  out.graph = SceneGraph(std::move(objects), std::move(edges), record.image_ref, record.image_wh);
  out.empty_annotation = out.graph.num_edges() == 0;
  if (out.empty_annotation) out.warnings.push_back("empty-annotation");
  return out;
}

AnnotationCheck check_annotation_reply(std::string_view reply, const DetectionRecord& record) {
  std::string_view body = extract_json(reply, '{', '}');
  if (body.empty()) throw ParseError("annotation reply contains no JSON object", 0);
  ParsedGraph parsed = parse_scene_graph(body, std::span<const DeclaredObject>(record.objects));
  AnnotationCheck out = validate_annotation(parsed.graph, record);
  out.warnings.insert(out.warnings.begin(), parsed.warnings.begin(), parsed.warnings.end());
  return out;
}

// ---------------------------------------------------------------------------

std::string_view to_string(SceneTheme theme) {
  return theme == SceneTheme::PeopleCentric ? "People-Centric" : "Non-People Centric";
}

std::span<const std::string_view> level2_categories(SceneTheme theme) {
  if (theme == SceneTheme::PeopleCentric) return kPeopleCentric;
  return kNonPeopleCentric;
}

DiversityLabel DiversityLabel::make(std::string_view level1, std::string_view level2) {
  DiversityLabel label;
  std::string l1 = squash(level1);
  if (l1 == "peoplecentric") {
    label.level1 = SceneTheme::PeopleCentric;
  } else if (l1 == "nonpeoplecentric") {
    label.level1 = SceneTheme::NonPeopleCentric;
  } else {
    throw TaxonomyError("unknown level-1 theme '" + std::string(level1) + "'");
  }
  std::string l2 = squash(level2);
  for (auto theme : {SceneTheme::PeopleCentric, SceneTheme::NonPeopleCentric}) {
    for (auto name : level2_categories(theme)) {
      if (squash(name) != l2) continue;
      if (theme != label.level1) {
        throw TaxonomyError("level-2 category '" + std::string(name) + "' does not belong to " +
                            std::string(to_string(label.level1)));
      }
      label.level2 = std::string(name);
      return label;
    }
  }
  throw TaxonomyError("unknown level-2 category '" + std::string(level2) + "'");
}

std::string diversity_image_id(const SceneGraph& g, std::size_t position) {
  return g.image_ref() ? *g.image_ref() : std::to_string(position);
}

std::string build_diversity_prompt(std::span<const SceneGraph> batch) {
  if (batch.empty()) throw DomainError("diversity prompt needs a non-empty batch");
  json info = json::array();
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const SceneGraph& g = batch[i];
    std::string id = diversity_image_id(g, i);
    json boxes = json::object();
    for (const auto& [oid, box] : g.objects()) {
      boxes[oid.raw()] = box ? json::array({box->xmin, box->ymin, box->xmax, box->ymax}) : json();
    }
    json rels = json::array();
    for (const auto& e : g.edges()) {
      rels.push_back({{"source", e.source.raw()}, {"target", e.target.raw()}, {"relation", e.relation}});
    }
    info.push_back({{"image_id", id},
                    {"file_name", std::filesystem::path(id).filename().string()},
                    {"xyxy", std::move(boxes)},
                    {"relationships", std::move(rels)}});
  }
  return replace_once(kDiversityTemplate, "{IMAGE_INFO}", info.dump());
}

std::vector<LabelResult> parse_diversity_reply(std::string_view reply) {
  std::string_view body = extract_json(reply, '[', ']');
  if (body.empty()) throw ParseError("diversity reply contains no JSON list", 0);
  json doc;
  try {
    doc = json::parse(body.begin(), body.end());
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("malformed diversity reply: ") + e.what(), e.byte);
  }
  if (!doc.is_array()) throw StructuralError("diversity reply must be a JSON list");
  std::vector<LabelResult> out;
  for (const auto& item : doc) {
    LabelResult r;
    if (!item.is_object()) {
      r.error = "list entry is not an object";
      out.push_back(std::move(r));
      continue;
    }
    r.image_id = json_string(item.value("image_id", json()));
    r.file_name = json_string(item.value("file_name", json()));
    auto l1 = item.find("level 1");
    auto l2 = item.find("level 2");
    if (l1 == item.end() || l2 == item.end() || !l1->is_string() || !l2->is_string()) {
      r.error = "missing \"level 1\" or \"level 2\"";
    } else {
      try {
        r.label = DiversityLabel::make(l1->get<std::string>(), l2->get<std::string>());
      } catch (const TaxonomyError& e) {
        r.error = e.what();
      }
    }
    out.push_back(std::move(r));
  }
  return out;
}

// ---------------------------------------------------------------------------

VocabStats compute_vocab_stats(std::span<const SceneGraph> dataset) {
  VocabStats stats;
  for (const auto& g : dataset) {
    for (const auto& e : g.edges()) ++stats.relations[e.relation];
    for (const auto& [id, box] : g.objects()) ++stats.categories[id.category()];
  }
  return stats;
}

std::string vocab_stats_to_json(const VocabStats& stats) {
  return json{{"relations", stats.relations}, {"categories", stats.categories}}.dump(2) + "\n";
}

std::map<std::string, std::string> resolve_synonyms(const std::map<std::string, std::string>& synonyms) {
  std::map<std::string, std::string> raw;
  for (const auto& [variant, canonical] : synonyms) {
    raw[canonical_relation(variant)] = canonical_relation(canonical);
  }
  std::map<std::string, std::string> resolved;
  for (const auto& [variant, first] : raw) {
    std::set<std::string> visited = {variant};
    std::string current = first;
    while (true) {
      auto it = raw.find(current);
      if (it == raw.end() || it->second == current) break;
      if (!visited.insert(current).second) {
        throw ConfigError("synonym map has a cycle through '" + current + "'");
      }
      current = it->second;
    }
    if (visited.contains(current) && current != variant) {
      throw ConfigError("synonym map has a cycle through '" + current + "'");
    }
    if (current == variant && first != variant) {
      throw ConfigError("synonym map has a cycle through '" + variant + "'");
    }
    resolved[variant] = current;
  }
  return resolved;
}

std::map<std::string, std::string> parse_synonym_map(std::string_view json_text) {
  json doc;
  try {
    doc = json::parse(json_text.begin(), json_text.end());
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("malformed synonym map: ") + e.what(), e.byte);
  }
  if (!doc.is_object()) throw ConfigError("synonym map must be a JSON object {variant: canonical}");
  std::map<std::string, std::string> out;
  for (const auto& [key, value] : doc.items()) {
    if (!value.is_string()) throw ConfigError("synonym for '" + key + "' must be a string");
    out[key] = value.get<std::string>();
  }
  return out;
}

FilterResult filter_relations(std::span<const SceneGraph> dataset, std::size_t min_freq,
                              const std::map<std::string, std::string>& synonyms) {
  auto mapping = resolve_synonyms(synonyms);
  FilterResult out;
  std::vector<SceneGraph> merged;
  merged.reserve(dataset.size());
  for (const auto& g : dataset) {
    std::vector<Edge> edges;
    for (Edge e : g.edges()) {
      if (auto it = mapping.find(e.relation); it != mapping.end()) e.relation = it->second;
      edges.push_back(std::move(e));
    }
    merged.emplace_back(g.objects(), std::move(edges), g.image_ref(), g.image_wh());
  }
  out.merged_stats = compute_vocab_stats(merged);

  for (const auto& g : merged) {
    std::vector<Edge> kept;
    for (const auto& e : g.edges()) {
      if (out.merged_stats.relations.at(e.relation) >= min_freq) {
        kept.push_back(e);
      } else {
        ++out.edges_removed;
      }
    }
    out.dataset.emplace_back(g.objects(), std::move(kept), g.image_ref(), g.image_wh());
  }
  return out;
}

std::vector<std::size_t> balanced_sample(std::span<const SceneGraph> dataset, double gamma,
                                         const LevelQuotas& quotas, std::uint64_t seed) {
  std::map<ComplexityLevel, std::vector<std::size_t>> population;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    population[complexity_level(complexity(dataset[i], gamma))].push_back(i);
  }
  for (const auto& [level, quota] : quotas) {
    std::size_t available = population[level].size();
    if (quota > available) {
      throw DomainError("quota for " + std::string(to_string(level)) + " is " + std::to_string(quota) +
                        " but only " + std::to_string(available) + " graph(s) qualify (short by " +
                        std::to_string(quota - available) + ")");
    }
  }
  std::vector<std::size_t> out;
  for (const auto& [level, quota] : quotas) {
    auto pool = population[level];
    Rng rng(derive_seed(seed, to_string(level), 0));
    shuffle(std::span<std::size_t>(pool), rng);
    out.insert(out.end(), pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(quota));
  }
  return out;
}

// ---------------------------------------------------------------------------

std::vector<AnnotatedImage> annotate_records(std::span<const DetectionRecord> records, ChatBackend& backend,
                                             const ImageLoader& load_image, std::size_t parallelism) {
  std::vector<AnnotatedImage> out(records.size());
  parallel_for(records.size(), parallelism, [&](std::size_t i) {
    const DetectionRecord& rec = records[i];
    AnnotatedImage& result = out[i];
    result.record_index = i;
    if (rec.objects.empty()) {
      result.skip_reason = "no detected objects";
      return;
    }
    ImageBlob image;
    try {
      image = load_image(rec);
    } catch (const std::exception& e) {
      result.skip_reason = e.what();
      return;
    }
    if (image.empty()) {
      result.skip_reason = "image not found";
      return;
    }
    const std::string prompt = build_annotation_prompt(rec);
    for (int attempt = 0; attempt < 2; ++attempt) {
      try {
        std::string reply = backend.complete(ChatRequest{prompt, &image, nullptr});
        AnnotationCheck check = check_annotation_reply(reply, rec);
        if (!check.empty_annotation) {
          result.graph = std::move(check.graph);
          result.warnings = std::move(check.warnings);
          result.skip_reason.clear();
          return;
        }
        result.skip_reason = "empty-annotation";
      } catch (const BackendError& e) {
        result.skip_reason = e.what();
        return;
      } catch (const Error& e) {
        result.skip_reason = std::string("unparseable reply: ") + e.what();
      }
    }
  });
  return out;
}

std::vector<LabelResult> classify_scenes(std::span<const SceneGraph> graphs, ChatBackend& backend,
                                         std::size_t batch_size, std::size_t parallelism) {
  if (batch_size == 0) throw ConfigError("classification batch size must be >= 1");
  std::vector<LabelResult> out(graphs.size());
  const std::size_t batches = (graphs.size() + batch_size - 1) / batch_size;
  parallel_for(batches, parallelism, [&](std::size_t b) {
    const std::size_t begin = b * batch_size;
    const std::size_t end = std::min(graphs.size(), begin + batch_size);
    auto batch = graphs.subspan(begin, end - begin);
    for (std::size_t i = begin; i < end; ++i) {
      out[i].image_id = diversity_image_id(graphs[i], i - begin);
      out[i].file_name = std::filesystem::path(out[i].image_id).filename().string();
      out[i].error = "missing from classification reply";
    }
    const std::string prompt = build_diversity_prompt(batch);
    for (int attempt = 0; attempt < 2; ++attempt) {
      std::vector<LabelResult> parsed;
      try {
        parsed = parse_diversity_reply(backend.complete(ChatRequest{prompt, nullptr, nullptr}));
      } catch (const BackendError& e) {
        for (std::size_t i = begin; i < end; ++i) out[i].error = e.what();
        return;
      } catch (const Error& e) {
        for (std::size_t i = begin; i < end; ++i) out[i].error = std::string("unparseable reply: ") + e.what();
        continue;
      }
      for (auto& entry : parsed) {
        for (std::size_t i = begin; i < end; ++i) {
          if (out[i].image_id != entry.image_id) continue;
          out[i].label = entry.label;
          out[i].error = entry.label ? "" : entry.error;
        }
      }
      return;
    }
  });
  return out;
}

}  // namespace scenebench
