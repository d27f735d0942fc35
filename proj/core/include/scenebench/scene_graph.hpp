#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace scenebench {

/// Instance id of the form "<category>.<index>", e.g. "sports ball.1".
/// The category is everything before the last dot, so multi-word and dotted
/// categories survive.
class ObjectId {
 public:
  /// An empty id; only useful as a placeholder before assignment.
  ObjectId() = default;
  /// Throws GrammarError when `raw` does not match the grammar.
  static ObjectId parse(std::string_view raw);
  static ObjectId make(std::string_view category, int index);

  const std::string& raw() const noexcept { return raw_; }
  const std::string& category() const noexcept { return category_; }
  int index() const noexcept { return index_; }

  // Category first, then numeric index: "person.2" < "person.10".
  std::strong_ordering operator<=>(const ObjectId& other) const;
  bool operator==(const ObjectId& other) const { return raw_ == other.raw_; }

 private:
  ObjectId(std::string raw, std::string category, int index)
      : raw_(std::move(raw)), category_(std::move(category)), index_(index) {}

  std::string raw_;
  std::string category_;
  int index_ = 0;
};

struct BoundingBox {
  int xmin = 0;
  int ymin = 0;
  int xmax = 0;
  int ymax = 0;

  /// Throws GrammarError unless 0 <= min < max on both axes.
  static BoundingBox make(int xmin, int ymin, int xmax, int ymax);
  bool operator==(const BoundingBox&) const = default;
};

struct ImageSize {
  int width = 0;
  int height = 0;
  bool operator==(const ImageSize&) const = default;
};

struct Edge {
  ObjectId source;
  ObjectId target;
  std::string relation;

  bool operator==(const Edge&) const = default;
};

/// Lowercase and trim a relation label.
std::string canonical_relation(std::string_view relation);

/// G = (V, E). Immutable once built; the constructor enforces that every edge
/// endpoint is a declared object, that no edge is a self-loop, and that the
/// edge list carries no duplicate (source, target, relation) triple.
/// Duplicate triples are collapsed; relation labels are canonicalized.
class SceneGraph {
 public:
  using ObjectMap = std::map<ObjectId, std::optional<BoundingBox>>;

  SceneGraph() = default;
  /// Throws StructuralError on a dangling endpoint, self-loop or empty relation.
  SceneGraph(ObjectMap objects, std::vector<Edge> edges,
             std::optional<std::string> image_ref = std::nullopt,
             std::optional<ImageSize> image_wh = std::nullopt);

  const ObjectMap& objects() const noexcept { return objects_; }
  const std::vector<Edge>& edges() const noexcept { return edges_; }
  const std::optional<std::string>& image_ref() const noexcept { return image_ref_; }
  const std::optional<ImageSize>& image_wh() const noexcept { return image_wh_; }

  std::size_t num_objects() const noexcept { return objects_.size(); }
  std::size_t num_edges() const noexcept { return edges_.size(); }
  bool empty() const noexcept { return objects_.empty() && edges_.empty(); }
  bool contains(const ObjectId& id) const { return objects_.contains(id); }

  /// Number of instances of `category` in V.
  int multiplicity(std::string_view category) const;

  bool operator==(const SceneGraph&) const = default;

 private:
  ObjectMap objects_;
  std::vector<Edge> edges_;
  std::optional<std::string> image_ref_;
  std::optional<ImageSize> image_wh_;
};

struct DeclaredObject {
  ObjectId id;
  BoundingBox box;
};

struct ParsedGraph {
  SceneGraph graph;
  std::vector<std::string> warnings;
};

/// Parse the annotation JSON ({"relationships": [...], optional "objects",
/// "image", "image_wh"}).
///
/// When `declared` is given (or the document carries an "objects" map) the
/// object set is fixed by it and edges that reference anything else are
/// dropped with a warning. Otherwise edge endpoints are materialized as
/// objects without boxes. Self-loops are dropped with a warning.
///
/// Throws ParseError (with byte offset) on malformed JSON, StructuralError
/// naming the edge index on a missing field, GrammarError on a bad id.
ParsedGraph parse_scene_graph(
    std::string_view json_text,
    std::optional<std::span<const DeclaredObject>> declared = std::nullopt);

/// Inverse of parse_scene_graph: compact JSON with every object listed in the
/// "objects" map (null for objects without a box).
std::string to_annotation_json(const SceneGraph& g);

/// "person kicking sports ball, person near person"; categories of objects with
/// no incident edge are appended once each, in object order.
std::string serialize_triplets(const SceneGraph& g);

/// "sports ball.1:[312, 360, 370, 417]"
DeclaredObject parse_object_spec(std::string_view spec);
std::string format_object_spec(const DeclaredObject& obj);

enum class ComplexityLevel { Simple, Medium, Hard };

std::string_view to_string(ComplexityLevel level);
ComplexityLevel complexity_level_from_string(std::string_view name);

/// gamma * |V| + (1 - gamma) * |E|. Throws DomainError for gamma outside [0, 1].
double complexity(const SceneGraph& g, double gamma);

/// Simple for c <= 3, Medium for 4..7, Hard for c >= 8. Values in the gaps
/// (3, 4) and (7, 8) are rounded half-up before bucketing.
/// Throws DomainError for negative c.
ComplexityLevel complexity_level(double c);

/// Graph with `removed` objects and every edge incident to them deleted.
SceneGraph remove_objects(const SceneGraph& g, std::span<const ObjectId> removed);

}  // namespace scenebench
