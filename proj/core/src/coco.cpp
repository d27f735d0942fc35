#include "scenebench/coco.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include <json.hpp>

#include "scenebench/errors.hpp"

namespace scenebench {

using nlohmann::json;

namespace {

json parse_document(std::string_view text, std::string_view what) {
  try {
    return json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw ParseError("malformed " + std::string(what) + ": " + e.what(), e.byte);
  }
}

const json& require(const json& obj, const char* key, std::string_view where) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) {
    throw StructuralError(std::string(where) + ": missing field \"" + key + "\"");
  }
  return *it;
}

int clamp_round(double v, int hi) {
  return std::clamp(static_cast<int>(std::lround(v)), 0, hi);
}

}  // namespace

CocoImport detections_from_coco(std::string_view instances_json, std::optional<std::string_view> categories_json) {
  json doc = parse_document(instances_json, "COCO instances file");
  if (!doc.is_object()) throw StructuralError("COCO instances file must be a JSON object");

  json categories_doc;
  if (categories_json) {
    categories_doc = parse_document(*categories_json, "COCO categories file");
    if (categories_doc.is_object()) categories_doc = require(categories_doc, "categories", "categories file");
  } else {
    categories_doc = require(doc, "categories", "COCO instances file");
  }
  if (!categories_doc.is_array()) throw StructuralError("COCO categories must be a list");

  std::map<std::int64_t, std::string> category_names;
  for (std::size_t i = 0; i < categories_doc.size(); ++i) {
    std::string where = "category " + std::to_string(i);
    const json& c = categories_doc[i];
    category_names[require(c, "id", where).get<std::int64_t>()] = require(c, "name", where).get<std::string>();
  }

  struct ImageEntry {
    std::string file_name;
    ImageSize size;
    std::vector<std::pair<std::int64_t, const json*>> annotations;
  };
  std::map<std::int64_t, ImageEntry> images;
  const json& image_list = require(doc, "images", "COCO instances file");
  for (std::size_t i = 0; i < image_list.size(); ++i) {
    std::string where = "image " + std::to_string(i);
    const json& img = image_list[i];
    images[require(img, "id", where).get<std::int64_t>()] =
        ImageEntry{require(img, "file_name", where).get<std::string>(),
                   ImageSize{require(img, "width", where).get<int>(), require(img, "height", where).get<int>()},
                   {}};
  }

  const json& annotations = require(doc, "annotations", "COCO instances file");
  for (std::size_t i = 0; i < annotations.size(); ++i) {
    std::string where = "annotation " + std::to_string(i);
    const json& ann = annotations[i];
    auto image_id = require(ann, "image_id", where).get<std::int64_t>();
    auto it = images.find(image_id);
    if (it == images.end()) throw StructuralError(where + ": unknown image_id " + std::to_string(image_id));
    auto ann_id = ann.contains("id") ? ann["id"].get<std::int64_t>() : static_cast<std::int64_t>(i);
    it->second.annotations.emplace_back(ann_id, &ann);
  }

  CocoImport out;
  for (auto& [image_id, entry] : images) {
    std::stable_sort(entry.annotations.begin(), entry.annotations.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    DetectionRecord record{entry.file_name, entry.size, {}};
    int next_index = 1;
    for (const auto& [ann_id, ann] : entry.annotations) {
      std::string where = "annotation " + std::to_string(ann_id);
      auto category_id = require(*ann, "category_id", where).get<std::int64_t>();
      auto name = category_names.find(category_id);
      if (name == category_names.end()) {
        throw StructuralError(where + ": unknown category_id " + std::to_string(category_id));
      }
      const json& bbox = require(*ann, "bbox", where);
      if (!bbox.is_array() || bbox.size() != 4) throw StructuralError(where + ": bbox must be [x, y, w, h]");
      double x = bbox[0].get<double>(), y = bbox[1].get<double>();
      double w = bbox[2].get<double>(), h = bbox[3].get<double>();
      int x1 = clamp_round(x, entry.size.width), y1 = clamp_round(y, entry.size.height);
      int x2 = clamp_round(x + w, entry.size.width), y2 = clamp_round(y + h, entry.size.height);
      if (x2 <= x1 || y2 <= y1) {
        out.warnings.push_back(entry.file_name + ": " + where + " has a degenerate box; dropped");
        continue;
      }
      record.objects.push_back(
          DeclaredObject{ObjectId::make(name->second, next_index++), BoundingBox::make(x1, y1, x2, y2)});
    }
    if (record.objects.empty()) {
      out.warnings.push_back(entry.file_name + ": no usable detections; skipped");
      continue;
    }
    out.records.push_back(std::move(record));
  }
  return out;
}

}  // namespace scenebench
