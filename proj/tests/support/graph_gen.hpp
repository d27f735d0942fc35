#pragma once

#include <string>
#include <vector>

#include "scenebench/annotate.hpp"
#include "scenebench/rng.hpp"
#include "scenebench/scene_graph.hpp"

namespace scenebench::testing {

struct GraphShape {
  int min_objects = 1;
  int max_objects = 12;
  int max_edges = 15;
};

/// Category names with spaces and dots, so id parsing is exercised.
const std::vector<std::string>& category_pool();

/// Random graph: objects numbered 1..n across categories drawn from the pool
/// (categories repeat), then up to max_edges distinct non-loop triples with
/// relations from `relations`.
SceneGraph random_graph(Rng& rng, const GraphShape& shape, const std::vector<std::string>& relations);

/// Objects of `g` with no boxes, in id order.
std::vector<ObjectId> object_ids(const SceneGraph& g);

/// Graph with exactly `edges` edges on `objects` objects (edges <= n(n-1)).
SceneGraph chain_graph(int objects, int edges, const std::string& relation = "near");

/// The worked example: person.2 kicking sports ball.1, person.2 near person.3.
SceneGraph example_graph();
/// Detections behind the worked example, image 640 x 512.
DetectionRecord example_detections();

}  // namespace scenebench::testing
