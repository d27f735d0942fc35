#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "scenebench/annotate.hpp"

namespace scenebench {

struct CocoImport {
  std::vector<DetectionRecord> records;
  std::vector<std::string> warnings;
};

/// Converts a COCO instances document into detection records, one per image
/// that has at least one usable box. Object ids are numbered 1, 2, ... within
/// each image in annotation-id order ("sports ball.1", "person.2").
/// Boxes go from [x, y, w, h] floats to rounded, clamped [x1, y1, x2, y2];
/// boxes that collapse to zero area are dropped with a warning.
///
/// `categories_json` optionally supplies the "categories" list from a separate
/// file. Throws ParseError on malformed JSON and StructuralError when a
/// required field is missing or an annotation names an unknown image or
/// category.
CocoImport detections_from_coco(std::string_view instances_json,
                                std::optional<std::string_view> categories_json = std::nullopt);

}  // namespace scenebench
