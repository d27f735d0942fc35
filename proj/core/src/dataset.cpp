#include "scenebench/dataset.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "scenebench/errors.hpp"

namespace scenebench {

using nlohmann::json;

namespace {

json parse_line(std::string_view line, std::string_view what) {
  try {
    return json::parse(line.begin(), line.end());
  } catch (const json::parse_error& e) {
    throw ParseError("malformed " + std::string(what) + ": " + e.what(), e.byte);
  }
}

bool blank(std::string_view line) {
  return line.find_first_not_of(" \t\r\n") == std::string_view::npos;
}

template <typename T, typename Fn>
std::vector<T> read_jsonl(const std::filesystem::path& path, Fn&& parse) {
  std::vector<T> out;
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  std::string line;
  for (std::size_t number = 1; std::getline(in, line); ++number) {
    if (blank(line)) continue;
    try {
      out.push_back(parse(line));
    } catch (const Error& e) {
      throw StructuralError(path.string() + ":" + std::to_string(number) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace

DatasetEntry dataset_entry_from_json(std::string_view line) {
  json doc = parse_line(line, "dataset line");
  if (!doc.is_object()) throw StructuralError("dataset line must be a JSON object");
  DatasetEntry entry;
  entry.graph = parse_scene_graph(line).graph;
  if (auto it = doc.find("id"); it != doc.end() && !it->is_null()) {
    entry.sample_id = it->is_string() ? it->get<std::string>() : it->dump();
  } else if (entry.graph.image_ref()) {
    entry.sample_id = *entry.graph.image_ref();
  } else {
    throw StructuralError("dataset line has neither \"id\" nor \"image\"");
  }
  if (auto it = doc.find("scene_category"); it != doc.end() && it->is_string()) {
    entry.category = it->get<std::string>();
  }
  return entry;
}

std::string dataset_entry_to_json(const DatasetEntry& entry) {
  json doc = json::parse(to_annotation_json(entry.graph));
  doc["id"] = entry.sample_id;
  if (entry.category) doc["scene_category"] = *entry.category;
  return doc.dump();
}

std::vector<DatasetEntry> read_dataset(const std::filesystem::path& path) {
  auto entries = read_jsonl<DatasetEntry>(path, [](const std::string& l) { return dataset_entry_from_json(l); });
  std::set<std::string> seen;
  for (const auto& e : entries) {
    if (!seen.insert(e.sample_id).second) {
      throw StructuralError(path.string() + ": duplicate sample id " + e.sample_id);
    }
  }
  return entries;
}

void write_dataset(const std::filesystem::path& path, std::span<const DatasetEntry> entries) {
  std::string text;
  for (const auto& e : entries) text += dataset_entry_to_json(e) + "\n";
  write_text_file(path, text);
}

std::size_t attach_labels(std::vector<DatasetEntry>& entries, const std::filesystem::path& labels_path) {
  std::map<std::string, std::string> labels;
  for (const auto& line : read_lines(labels_path)) {
    json doc = parse_line(line, "label line");
    auto id = doc.find("image_id");
    auto l2 = doc.find("level 2");
    if (id == doc.end() || l2 == doc.end() || !id->is_string() || !l2->is_string()) continue;
    labels[id->get<std::string>()] = l2->get<std::string>();
  }
  std::size_t labeled = 0;
  for (auto& e : entries) {
    auto it = labels.find(e.sample_id);
    if (it == labels.end() && e.graph.image_ref()) it = labels.find(*e.graph.image_ref());
    if (it == labels.end()) continue;
    e.category = it->second;
    ++labeled;
  }
  return labeled;
}

std::map<std::string, GraphInfo> graph_index(std::span<const DatasetEntry> entries) {
  std::map<std::string, GraphInfo> out;
  for (const auto& e : entries) out[e.sample_id] = GraphInfo{&e.graph, e.category};
  return out;
}

DetectionRecord detection_record_from_json(std::string_view line) {
  json doc = parse_line(line, "detection record");
  DetectionRecord record;
  auto image = doc.find("image");
  auto wh = doc.find("image_wh");
  auto objects = doc.find("objects");
  if (image == doc.end() || !image->is_string()) throw StructuralError("detection record: missing field \"image\"");
  if (wh == doc.end() || !wh->is_array() || wh->size() != 2) {
    throw StructuralError("detection record: \"image_wh\" must be [width, height]");
  }
  if (objects == doc.end() || !objects->is_array()) {
    throw StructuralError("detection record: missing field \"objects\"");
  }
  record.image_ref = image->get<std::string>();
  record.image_wh = ImageSize{(*wh)[0].get<int>(), (*wh)[1].get<int>()};
  for (const auto& spec : *objects) record.objects.push_back(parse_object_spec(spec.get<std::string>()));
  record.validate();
  return record;
}

std::string detection_record_to_json(const DetectionRecord& record) {
  json objects = json::array();
  for (const auto& obj : record.objects) objects.push_back(format_object_spec(obj));
  return json{{"image", record.image_ref},
              {"image_wh", {record.image_wh.width, record.image_wh.height}},
              {"objects", std::move(objects)}}
      .dump();
}

std::vector<DetectionRecord> read_detection_records(const std::filesystem::path& path) {
  return read_jsonl<DetectionRecord>(path, [](const std::string& l) { return detection_record_from_json(l); });
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!blank(line)) out.push_back(line);
  }
  return out;
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write " + path.string());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw ConfigError("short write to " + path.string());
}

}  // namespace scenebench
