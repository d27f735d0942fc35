#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "scenebench/annotate.hpp"
#include "scenebench/metrics.hpp"
#include "scenebench/scene_graph.hpp"

namespace scenebench {

/// One benchmark sample: an annotation document plus "id" and an optional
/// level-2 "scene_category", one JSON object per line.
struct DatasetEntry {
  std::string sample_id;
  SceneGraph graph;
  std::optional<std::string> category;

  bool operator==(const DatasetEntry&) const = default;
};

/// Parses one dataset line. The sample id falls back to the image reference.
/// Throws ParseError / StructuralError / GrammarError.
DatasetEntry dataset_entry_from_json(std::string_view line);
std::string dataset_entry_to_json(const DatasetEntry& entry);

/// Reads a JSONL dataset, skipping blank lines. Errors name the line number.
/// Throws StructuralError on a duplicate sample id.
std::vector<DatasetEntry> read_dataset(const std::filesystem::path& path);
void write_dataset(const std::filesystem::path& path, std::span<const DatasetEntry> entries);

/// Sets `category` from a classification JSONL ({"image_id", "level 2"} per
/// line, as written by the classify command), matching on sample id or image
/// reference. Returns the number of entries labeled.
std::size_t attach_labels(std::vector<DatasetEntry>& entries, const std::filesystem::path& labels_path);

std::map<std::string, GraphInfo> graph_index(std::span<const DatasetEntry> entries);

/// Detection records as JSONL:
/// {"image": "x.jpg", "image_wh": [w, h], "objects": ["person.1:[1, 2, 3, 4]", ...]}
DetectionRecord detection_record_from_json(std::string_view line);
std::string detection_record_to_json(const DetectionRecord& record);
std::vector<DetectionRecord> read_detection_records(const std::filesystem::path& path);

/// Whole file as a string; throws ConfigError when it cannot be opened.
std::string read_text_file(const std::filesystem::path& path);
/// Non-blank lines of a text file.
std::vector<std::string> read_lines(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);

}  // namespace scenebench
