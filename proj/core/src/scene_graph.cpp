#include "scenebench/scene_graph.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <set>
#include <tuple>

#include <json.hpp>

#include "scenebench/errors.hpp"

namespace scenebench {

using nlohmann::json;

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

int parse_positive_int(std::string_view digits, std::string_view context) {
  if (digits.empty() || !std::all_of(digits.begin(), digits.end(),
                                     [](char c) { return c >= '0' && c <= '9'; })) {
    throw GrammarError("invalid object id '" + std::string(context) +
                       "': index must be a positive integer");
  }
  int value = 0;
  auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), value);
  if (ec != std::errc{} || ptr != digits.data() + digits.size() || value <= 0) {
    throw GrammarError("invalid object id '" + std::string(context) +
                       "': index must be a positive integer");
  }
  return value;
}

int json_int(const json& v, std::string_view what) {
  if (v.is_number_integer()) return v.get<int>();
  if (v.is_number_float()) {
    double d = v.get<double>();
    if (std::floor(d) == d && std::abs(d) < 1e9) return static_cast<int>(d);
  }
  throw StructuralError(std::string(what) + ": expected an integer, got " + v.dump());
}

BoundingBox box_from_json(const json& v, std::string_view what) {
  if (!v.is_array() || v.size() != 4) {
    throw StructuralError(std::string(what) + ": bounding box must be [xmin, ymin, xmax, ymax]");
  }
  return BoundingBox::make(json_int(v[0], what), json_int(v[1], what), json_int(v[2], what),
                           json_int(v[3], what));
}

const std::string& edge_field(const json& e, const char* key, std::size_t index) {
  auto it = e.find(key);
  if (it == e.end()) {
    throw StructuralError("relationship " + std::to_string(index) + ": missing field '" + key + "'");
  }
  if (!it->is_string()) {
    throw StructuralError("relationship " + std::to_string(index) + ": field '" + key +
                          "' must be a string");
  }
  return it->get_ref<const std::string&>();
}

}  // namespace

// ---------------------------------------------------------------------------
// ObjectId / BoundingBox

ObjectId ObjectId::parse(std::string_view raw) {
  std::string_view text = trim(raw);
  auto dot = text.rfind('.');
  if (dot == std::string_view::npos) {
    throw GrammarError("invalid object id '" + std::string(raw) +
                       "': expected '<category>.<index>'");
  }
  std::string_view category = text.substr(0, dot);
  if (category.empty() || trim(category).size() != category.size()) {
    throw GrammarError("invalid object id '" + std::string(raw) +
                       "': category must be non-empty without surrounding whitespace");
  }
  int index = parse_positive_int(text.substr(dot + 1), raw);
  return make(category, index);
}

ObjectId ObjectId::make(std::string_view category, int index) {
  if (category.empty() || trim(category).size() != category.size() || index <= 0) {
    throw GrammarError("invalid object id components '" + std::string(category) + "', " +
                       std::to_string(index));
  }
  std::string cat(category);
  return ObjectId(cat + "." + std::to_string(index), cat, index);
}

std::strong_ordering ObjectId::operator<=>(const ObjectId& other) const {
  if (auto c = category_ <=> other.category_; c != 0) return c;
  return index_ <=> other.index_;
}

BoundingBox BoundingBox::make(int xmin, int ymin, int xmax, int ymax) {
  if (xmin < 0 || ymin < 0 || xmin >= xmax || ymin >= ymax) {
    throw GrammarError("invalid bounding box [" + std::to_string(xmin) + ", " +
                       std::to_string(ymin) + ", " + std::to_string(xmax) + ", " +
                       std::to_string(ymax) + "]: need 0 <= min < max on both axes");
  }
  return BoundingBox{xmin, ymin, xmax, ymax};
}

std::string canonical_relation(std::string_view relation) {
  std::string out(trim(relation));
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

// ---------------------------------------------------------------------------
// SceneGraph

SceneGraph::SceneGraph(ObjectMap objects, std::vector<Edge> edges,
                       std::optional<std::string> image_ref, std::optional<ImageSize> image_wh)
    : objects_(std::move(objects)),
      image_ref_(std::move(image_ref)),
      image_wh_(image_wh) {
  std::set<std::tuple<std::string, std::string, std::string>> seen;
  edges_.reserve(edges.size());
  for (std::size_t i = 0; i < edges.size(); ++i) {
    Edge& e = edges[i];
    e.relation = canonical_relation(e.relation);
    if (e.relation.empty()) {
      throw StructuralError("edge " + std::to_string(i) + ": empty relation");
    }
    if (e.source == e.target) {
      throw StructuralError("edge " + std::to_string(i) + ": self-loop on " + e.source.raw());
    }
    if (!objects_.contains(e.source) || !objects_.contains(e.target)) {
      throw StructuralError("edge " + std::to_string(i) + ": endpoint not in object set (" +
                            e.source.raw() + " -> " + e.target.raw() + ")");
    }
    if (seen.emplace(e.source.raw(), e.target.raw(), e.relation).second) {
      edges_.push_back(std::move(e));
    }
  }
}

int SceneGraph::multiplicity(std::string_view category) const {
  int n = 0;
  for (const auto& [id, box] : objects_) {
    if (id.category() == category) ++n;
  }
  return n;
}

// ---------------------------------------------------------------------------
// Parsing / serialization

ParsedGraph parse_scene_graph(std::string_view json_text,
                              std::optional<std::span<const DeclaredObject>> declared) {
  json doc;
  try {
    doc = json::parse(json_text.begin(), json_text.end());
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("malformed scene graph JSON: ") + e.what(), e.byte);
  }
  if (!doc.is_object()) {
    throw StructuralError("scene graph JSON must be an object");
  }
  auto rels = doc.find("relationships");
  if (rels == doc.end() || !rels->is_array()) {
    throw StructuralError("scene graph JSON needs a top-level \"relationships\" array");
  }

  ParsedGraph out;
  SceneGraph::ObjectMap objects;
  bool fixed_objects = false;

  if (declared) {
    fixed_objects = true;
    for (const auto& d : *declared) objects.insert_or_assign(d.id, d.box);
  } else if (auto om = doc.find("objects"); om != doc.end() && !om->is_null()) {
    if (!om->is_object()) {
      throw StructuralError("\"objects\" must map ids to [xmin, ymin, xmax, ymax]");
    }
    fixed_objects = true;
    for (const auto& [key, value] : om->items()) {
      auto id = ObjectId::parse(key);
      if (value.is_null()) {
        objects.insert_or_assign(id, std::nullopt);
      } else {
        objects.insert_or_assign(id, box_from_json(value, "object " + key));
      }
    }
  }

  std::vector<Edge> edges;
  std::set<std::tuple<std::string, std::string, std::string>> seen;
  for (std::size_t i = 0; i < rels->size(); ++i) {
    const json& e = (*rels)[i];
    if (!e.is_object()) {
      throw StructuralError("relationship " + std::to_string(i) + ": expected an object");
    }
    auto source = ObjectId::parse(edge_field(e, "source", i));
    auto target = ObjectId::parse(edge_field(e, "target", i));
    auto relation = canonical_relation(edge_field(e, "relation", i));
    if (relation.empty()) {
      throw StructuralError("relationship " + std::to_string(i) + ": empty relation");
    }
    if (source == target) {
      out.warnings.push_back("relationship " + std::to_string(i) + ": dropped self-loop on " +
                             source.raw());
      continue;
    }
    if (fixed_objects) {
      bool missing_source = !objects.contains(source);
      bool missing_target = !objects.contains(target);
      if (missing_source || missing_target) {
        out.warnings.push_back("relationship " + std::to_string(i) +
                               ": dropped, undeclared object " +
                               (missing_source ? source.raw() : target.raw()));
        continue;
      }
    } else {
      objects.try_emplace(source, std::nullopt);
      objects.try_emplace(target, std::nullopt);
    }
    if (!seen.emplace(source.raw(), target.raw(), relation).second) {
      out.warnings.push_back("relationship " + std::to_string(i) + ": duplicate triple dropped");
      continue;
    }
    edges.push_back(Edge{std::move(source), std::move(target), std::move(relation)});
  }

  std::optional<std::string> image_ref;
  if (auto im = doc.find("image"); im != doc.end() && im->is_string()) {
    image_ref = im->get<std::string>();
  }
  std::optional<ImageSize> image_wh;
  if (auto wh = doc.find("image_wh"); wh != doc.end() && !wh->is_null()) {
    if (!wh->is_array() || wh->size() != 2) {
      throw StructuralError("\"image_wh\" must be [width, height]");
    }
    image_wh = ImageSize{json_int((*wh)[0], "image_wh"), json_int((*wh)[1], "image_wh")};
  }

  out.graph = SceneGraph(std::move(objects), std::move(edges), std::move(image_ref), image_wh);
  return out;
}

std::string to_annotation_json(const SceneGraph& g) {
  json rels = json::array();
  for (const auto& e : g.edges()) {
    rels.push_back({{"source", e.source.raw()}, {"target", e.target.raw()}, {"relation", e.relation}});
  }
  json objects = json::object();
  for (const auto& [id, box] : g.objects()) {
    objects[id.raw()] = box ? json::array({box->xmin, box->ymin, box->xmax, box->ymax}) : json();
  }
  json doc = {{"relationships", std::move(rels)}, {"objects", std::move(objects)}};
  if (g.image_ref()) doc["image"] = *g.image_ref();
  if (g.image_wh()) doc["image_wh"] = json::array({g.image_wh()->width, g.image_wh()->height});
  return doc.dump();
}

std::string serialize_triplets(const SceneGraph& g) {
  std::vector<std::string> phrases;
  std::set<ObjectId> connected;
  for (const auto& e : g.edges()) {
    phrases.push_back(e.source.category() + " " + e.relation + " " + e.target.category());
    connected.insert(e.source);
    connected.insert(e.target);
  }
  std::set<std::string> isolated_seen;
  for (const auto& [id, box] : g.objects()) {
    if (!connected.contains(id) && isolated_seen.insert(id.category()).second) {
      phrases.push_back(id.category());
    }
  }
  std::string out;
  for (std::size_t i = 0; i < phrases.size(); ++i) {
    if (i) out += ", ";
    out += phrases[i];
  }
  return out;
}

DeclaredObject parse_object_spec(std::string_view spec) {
  auto fail = [&](const std::string& why) -> GrammarError {
    return GrammarError("invalid object spec '" + std::string(spec) + "': " + why);
  };
  std::string_view text = trim(spec);
  auto colon = text.rfind(":[");
  if (colon == std::string_view::npos || text.back() != ']') {
    throw fail("expected '<id>:[xmin, ymin, xmax, ymax]'");
  }
  ObjectId id = [&] {
    try {
      return ObjectId::parse(text.substr(0, colon));
    } catch (const GrammarError& e) {
      throw fail(e.what());
    }
  }();
  std::string_view inner = text.substr(colon + 2, text.size() - colon - 3);
  int coords[4];
  for (int k = 0; k < 4; ++k) {
    auto comma = inner.find(',');
    std::string_view part = trim(k < 3 ? inner.substr(0, comma) : inner);
    if ((k < 3 && comma == std::string_view::npos) || (k == 3 && inner.find(',') != std::string_view::npos)) {
      throw fail("expected exactly four coordinates");
    }
    bool negative = !part.empty() && part.front() == '-';
    std::string_view digits = negative ? part.substr(1) : part;
    int value = 0;
    auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), value);
    if (digits.empty() || ec != std::errc{} || ptr != digits.data() + digits.size()) {
      throw fail("coordinate '" + std::string(part) + "' is not an integer");
    }
    coords[k] = negative ? -value : value;
    if (k < 3) inner.remove_prefix(comma + 1);
  }
  try {
    return DeclaredObject{std::move(id), BoundingBox::make(coords[0], coords[1], coords[2], coords[3])};
  } catch (const GrammarError& e) {
    throw fail(e.what());
  }
}

std::string format_object_spec(const DeclaredObject& obj) {
  return obj.id.raw() + ":[" + std::to_string(obj.box.xmin) + ", " + std::to_string(obj.box.ymin) +
         ", " + std::to_string(obj.box.xmax) + ", " + std::to_string(obj.box.ymax) + "]";
}

// ---------------------------------------------------------------------------
// Complexity

std::string_view to_string(ComplexityLevel level) {
  switch (level) {
    case ComplexityLevel::Simple: return "Simple";
    case ComplexityLevel::Medium: return "Medium";
    case ComplexityLevel::Hard: return "Hard";
  }
  return "?";
}

ComplexityLevel complexity_level_from_string(std::string_view name) {
  std::string lower = canonical_relation(name);
  if (lower == "simple") return ComplexityLevel::Simple;
  if (lower == "medium") return ComplexityLevel::Medium;
  if (lower == "hard") return ComplexityLevel::Hard;
  throw ConfigError("unknown complexity level '" + std::string(name) + "'");
}

double complexity(const SceneGraph& g, double gamma) {
  if (!(gamma >= 0.0 && gamma <= 1.0)) {
    throw DomainError("gamma must lie in [0, 1], got " + std::to_string(gamma));
  }
  return gamma * static_cast<double>(g.num_objects()) +
         (1.0 - gamma) * static_cast<double>(g.num_edges());
}

ComplexityLevel complexity_level(double c) {
  if (!(c >= 0.0)) {
    throw DomainError("complexity must be non-negative, got " + std::to_string(c));
  }
  if (c <= 3.0) return ComplexityLevel::Simple;
  if (c < 4.0) return c >= 3.5 ? ComplexityLevel::Medium : ComplexityLevel::Simple;
  if (c <= 7.0) return ComplexityLevel::Medium;
  if (c < 8.0) return c >= 7.5 ? ComplexityLevel::Hard : ComplexityLevel::Medium;
  return ComplexityLevel::Hard;
}

SceneGraph remove_objects(const SceneGraph& g, std::span<const ObjectId> removed) {
  std::set<ObjectId> gone(removed.begin(), removed.end());
  SceneGraph::ObjectMap objects;
  for (const auto& [id, box] : g.objects()) {
    if (!gone.contains(id)) objects.emplace(id, box);
  }
  std::vector<Edge> edges;
  for (const auto& e : g.edges()) {
    if (!gone.contains(e.source) && !gone.contains(e.target)) edges.push_back(e);
  }
  return SceneGraph(std::move(objects), std::move(edges), g.image_ref(), g.image_wh());
}

}  // namespace scenebench
