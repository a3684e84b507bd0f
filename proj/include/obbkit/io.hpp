#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "obbkit/box.hpp"
#include "obbkit/roialign.hpp"

namespace obbkit {

// Line-delimited JSON formats. Blank lines are skipped; errors carry the
// 1-based physical line number.
//
//   .gt.jsonl    {"image_id", "cx", "cy", "w", "h", "theta", "class_id", "scene"}
//   .pred.jsonl  {"image_id", "cx", "cy", "w", "h", "theta", "class_id", "score"}
//
// class_id defaults to 0 and scene to "unspecified" when absent. Angles are
// canonicalized on read.

std::vector<GroundTruthRecord> parse_ground_truth(std::istream& in);
std::vector<Detection> parse_predictions(std::istream& in);

/// Geometry-only records: any line with cx, cy, w, h, theta.
std::vector<OrientedBoxd> parse_boxes(std::istream& in);

void write_ground_truth(std::ostream& out, std::span<const GroundTruthRecord> records);
void write_predictions(std::ostream& out, std::span<const Detection> detections);

/// Row-major real array with an explicit shape.
struct WeightArray {
  std::vector<std::int64_t> shape;
  std::vector<double> data;

  std::int64_t element_count() const;

  friend bool operator==(const WeightArray&, const WeightArray&) = default;
};

/// Named parameter arrays, keyed by dotted path ("stage0.dynamic.weight").
class WeightStore {
 public:
  /// Validates shape/element-count agreement and finiteness.
  void insert(std::string name, WeightArray array);

  bool contains(const std::string& name) const { return arrays_.contains(name); }

  /// Throws ValidationError naming the path when absent.
  const WeightArray& at(const std::string& name) const;

  /// Throws one ValidationError listing every missing path.
  void require(std::span<const std::string> names) const;

  const std::map<std::string, WeightArray>& arrays() const { return arrays_; }
  std::size_t size() const { return arrays_.size(); }

  friend bool operator==(const WeightStore&, const WeightStore&) = default;

 private:
  std::map<std::string, WeightArray> arrays_;
};

/// `.wts.json`: {"<path>": {"shape": [ints], "data": [numbers]}, ...}
WeightStore load_weights(std::istream& in);
void save_weights(std::ostream& out, const WeightStore& store);

/// One image's feature pyramid as stored in a `.pyr.jsonl` line:
/// {"image_id", "image_width", "image_height",
///  "levels": [{"stride", "shape": [C, H, W], "data": [row-major]}, ...]}
struct PyramidRecord {
  std::string image_id;
  double image_width{0};
  double image_height{0};
  FeaturePyramidd pyramid;
};

/// Shortest decimal text that reads back to the same double.
std::string format_number(double value);

std::vector<PyramidRecord> parse_pyramids(std::istream& in);
void write_pyramid(std::ostream& out, const PyramidRecord& record);

}  // namespace obbkit
