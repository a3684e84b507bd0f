#include "obbkit/io.hpp"

#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

#include "json.hpp"

namespace obbkit {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

bool is_blank(const std::string& line) { return line.find_first_not_of(" \t\r\n") == std::string::npos; }

// Calls `fn(json, line_number)` for every non-blank line, translating library
// errors into ParseError / ValidationError with the line number attached.
template <typename Fn>
void for_each_json_line(std::istream& in, Fn&& fn) {
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (is_blank(line)) continue;
    json record;
    try {
      record = json::parse(line);
    } catch (const json::exception& e) {
      throw ParseError(std::string("malformed JSON: ") + e.what(), number);
    }
    if (!record.is_object()) throw ParseError("record must be a JSON object", number);
    try {
      fn(record, number);
    } catch (const ParseError& e) {
      if (e.line() == 0) throw ParseError(e.what(), number);
      throw;
    } catch (const ValidationError& e) {
      throw ValidationError("line " + std::to_string(number) + ": " + e.what());
    } catch (const json::exception& e) {
      throw ParseError(e.what(), number);
    }
  }
}

double number_field(const json& record, const char* key, std::size_t line) {
  const auto it = record.find(key);
  if (it == record.end()) throw ParseError(std::string("missing field '") + key + "'", line);
  if (!it->is_number()) throw ParseError(std::string("field '") + key + "' must be a number", line);
  return it->get<double>();
}

std::string image_id_field(const json& record, std::size_t line) {
  const auto it = record.find("image_id");
  if (it == record.end()) throw ParseError("missing field 'image_id'", line);
  if (!it->is_string()) throw ParseError("field 'image_id' must be a string", line);
  return it->get<std::string>();
}

int class_id_field(const json& record, std::size_t line) {
  const auto it = record.find("class_id");
  if (it == record.end()) return 0;
  if (!it->is_number_integer() || it->get<std::int64_t>() < 0) {
    throw ParseError("field 'class_id' must be a non-negative integer", line);
  }
  return it->get<int>();
}

OrientedBoxd box_fields(const json& record, std::size_t line) {
  return make_box(number_field(record, "cx", line), number_field(record, "cy", line), number_field(record, "w", line),
                  number_field(record, "h", line), number_field(record, "theta", line));
}

ordered_json box_json(const std::string& image_id, const OrientedBoxd& box, int class_id) {
  ordered_json j;
  j["image_id"] = image_id;
  j["cx"] = box.cx;
  j["cy"] = box.cy;
  j["w"] = box.w;
  j["h"] = box.h;
  j["theta"] = box.theta;
  j["class_id"] = class_id;
  return j;
}

WeightArray weight_array(const json& entry, const std::string& name) {
  if (!entry.is_object()) throw ParseError("weight entry '" + name + "' must be an object", 0);
  const auto shape = entry.find("shape");
  const auto data = entry.find("data");
  if (shape == entry.end() || !shape->is_array()) throw ParseError("weight '" + name + "' lacks a shape array", 0);
  if (data == entry.end() || !data->is_array()) throw ParseError("weight '" + name + "' lacks a data array", 0);
  WeightArray array;
  array.shape.reserve(shape->size());
  for (const auto& d : *shape) {
    if (!d.is_number_integer() || d.get<std::int64_t>() < 0) {
      throw ParseError("weight '" + name + "' has a non-integer or negative dimension", 0);
    }
    array.shape.push_back(d.get<std::int64_t>());
  }
  array.data.reserve(data->size());
  for (const auto& v : *data) {
    if (!v.is_number()) throw ParseError("weight '" + name + "' has a non-numeric value", 0);
    array.data.push_back(v.get<double>());
  }
  return array;
}

}  // namespace

std::vector<GroundTruthRecord> parse_ground_truth(std::istream& in) {
  std::vector<GroundTruthRecord> records;
  for_each_json_line(in, [&](const json& j, std::size_t line) {
    GroundTruthRecord r;
    r.image_id = image_id_field(j, line);
    r.box = box_fields(j, line);
    r.class_id = class_id_field(j, line);
    if (const auto it = j.find("scene"); it != j.end()) {
      if (!it->is_string()) throw ParseError("field 'scene' must be a string", line);
      const auto scene = scene_from_string(it->get<std::string>());
      if (!scene) throw ValidationError("scene must be inshore, offshore or unspecified");
      r.scene = *scene;
    }
    records.push_back(std::move(r));
  });
  return records;
}

std::vector<Detection> parse_predictions(std::istream& in) {
  std::vector<Detection> detections;
  for_each_json_line(in, [&](const json& j, std::size_t line) {
    Detection d;
    d.image_id = image_id_field(j, line);
    d.box = box_fields(j, line);
    d.class_id = class_id_field(j, line);
    d.score = number_field(j, "score", line);
    if (!(d.score >= 0.0 && d.score <= 1.0)) throw ValidationError("score must lie in [0, 1]");
    detections.push_back(std::move(d));
  });
  return detections;
}

std::vector<OrientedBoxd> parse_boxes(std::istream& in) {
  std::vector<OrientedBoxd> boxes;
  for_each_json_line(in, [&](const json& j, std::size_t line) { boxes.push_back(box_fields(j, line)); });
  return boxes;
}

void write_ground_truth(std::ostream& out, std::span<const GroundTruthRecord> records) {
  for (const auto& r : records) {
    ordered_json j = box_json(r.image_id, r.box, r.class_id);
    j["scene"] = std::string(to_string(r.scene));
    out << j.dump() << '\n';
  }
}

void write_predictions(std::ostream& out, std::span<const Detection> detections) {
  for (const auto& d : detections) {
    ordered_json j = box_json(d.image_id, d.box, d.class_id);
    j["score"] = d.score;
    out << j.dump() << '\n';
  }
}

std::int64_t WeightArray::element_count() const {
  std::int64_t count = 1;
  for (const auto d : shape) count *= d;
  return count;
}

void WeightStore::insert(std::string name, WeightArray array) {
  if (name.empty()) throw ValidationError("weight path must be non-empty");
  if (array.element_count() != std::int64_t(array.data.size())) {
    std::ostringstream msg;
    msg << "weight '" << name << "' declares shape [";
    for (std::size_t i = 0; i < array.shape.size(); ++i) msg << (i ? "," : "") << array.shape[i];
    msg << "] (" << array.element_count() << " values) but holds " << array.data.size();
    throw ValidationError(msg.str());
  }
  for (const double v : array.data) {
    if (!std::isfinite(v)) throw ValidationError("weight '" + name + "' contains a non-finite value");
  }
  arrays_.insert_or_assign(std::move(name), std::move(array));
}

const WeightArray& WeightStore::at(const std::string& name) const {
  const auto it = arrays_.find(name);
  if (it == arrays_.end()) throw ValidationError("missing weight '" + name + "'");
  return it->second;
}

void WeightStore::require(std::span<const std::string> names) const {
  std::string missing;
  for (const auto& name : names) {
    if (!contains(name)) missing += (missing.empty() ? "" : ", ") + name;
  }
  if (!missing.empty()) throw ValidationError("missing weights: " + missing);
}

WeightStore load_weights(std::istream& in) {
  json root;
  try {
    root = json::parse(in);
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed weight file: ") + e.what(), 0);
  }
  if (!root.is_object()) throw ParseError("weight file must be a JSON object", 0);
  WeightStore store;
  for (const auto& [name, entry] : root.items()) store.insert(name, weight_array(entry, name));
  return store;
}

void save_weights(std::ostream& out, const WeightStore& store) {
  ordered_json root = ordered_json::object();
  for (const auto& [name, array] : store.arrays()) {
    root[name] = ordered_json{{"shape", array.shape}, {"data", array.data}};
  }
  out << root.dump() << '\n';
}

std::string format_number(double value) {
  char buffer[32];
  const auto result = std::to_chars(buffer, buffer + sizeof buffer, value);
  return std::string(buffer, result.ptr);
}

std::vector<PyramidRecord> parse_pyramids(std::istream& in) {
  std::vector<PyramidRecord> records;
  for_each_json_line(in, [&](const json& j, std::size_t line) {
    const std::string image_id = image_id_field(j, line);
    const double width = number_field(j, "image_width", line);
    const double height = number_field(j, "image_height", line);
    if (!(width > 0) || !(height > 0)) throw ValidationError("image size must be positive");
    const auto levels = j.find("levels");
    if (levels == j.end() || !levels->is_array()) throw ParseError("missing 'levels' array", line);

    std::vector<FeatureMapd> maps;
    for (const auto& level : *levels) {
      const WeightArray array = weight_array(level, "levels");
      if (array.shape.size() != 3) throw ValidationError("pyramid level shape must be [C, H, W]");
      if (array.element_count() != std::int64_t(array.data.size())) {
        throw ValidationError("pyramid level data does not match its shape");
      }
      const auto c = Eigen::Index(array.shape[0]);
      const auto hw = Eigen::Index(array.shape[1] * array.shape[2]);
      using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
      FeatureMapd::Grid grid = Eigen::Map<const RowMajor>(array.data.data(), c, hw);
      maps.emplace_back(int(c), int(array.shape[1]), int(array.shape[2]), number_field(level, "stride", line),
                        std::move(grid));
    }
    records.push_back({image_id, width, height, FeaturePyramidd(std::move(maps))});
  });
  return records;
}

void write_pyramid(std::ostream& out, const PyramidRecord& record) {
  ordered_json j;
  j["image_id"] = record.image_id;
  j["image_width"] = record.image_width;
  j["image_height"] = record.image_height;
  ordered_json levels = ordered_json::array();
  for (const auto& map : record.pyramid.levels()) {
    using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    const RowMajor row_major = map.data();
    std::vector<double> data(row_major.data(), row_major.data() + row_major.size());
    levels.push_back(ordered_json{{"stride", map.stride()},
                                  {"shape", {map.channels(), map.height(), map.width()}},
                                  {"data", std::move(data)}});
  }
  j["levels"] = std::move(levels);
  out << j.dump() << '\n';
}

}  // namespace obbkit
