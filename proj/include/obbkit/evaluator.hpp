#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "obbkit/box.hpp"

namespace obbkit {

enum class ApMethod { all_points, eleven_point };

struct EvalCounts {
  int n_tp{0};
  int n_gt{0};
  int n_det{0};
};

struct PRPoint {
  double recall{0};
  double precision{0};

  friend bool operator==(const PRPoint&, const PRPoint&) = default;
};

/// One point per ranked detection, in descending score order.
struct PRCurve {
  std::vector<PRPoint> points;
};

/// Greedy matching for one image.
///
/// Detections are visited by descending score (ties keep input order); each
/// takes the unmatched ground truth of its class with the highest IoU, if that
/// IoU is at least `iou_thresh`. Returns flags in the input order of `dets`.
std::vector<bool> match_detections(std::span<const Detection> dets, std::span<const GroundTruthRecord> gts,
                                   double iou_thresh = 0.5);

/// Cumulative precision (TP / detections so far) and recall (TP / n_gt).
/// Empty when n_gt is 0.
PRCurve pr_curve(const std::vector<bool>& ranked_flags, int n_gt);

/// all_points: area under the monotone precision envelope.
/// eleven_point: mean envelope value at recall 0, 0.1, ..., 1.
double average_precision(const PRCurve& curve, ApMethod method = ApMethod::all_points);

struct SplitResult {
  double ap{0};
  EvalCounts counts;
  PRCurve curve;
};

struct EvalReport {
  SplitResult overall;
  SplitResult inshore;
  SplitResult offshore;

  double ap50() const { return overall.ap; }
  double ap50_inshore() const { return inshore.ap; }
  double ap50_offshore() const { return offshore.ap; }
};

/// A test image that has no objects but should still be scored.
struct ImageEntry {
  std::string image_id;
  Scene scene{Scene::unspecified};
};

struct EvalOptions {
  double iou_thresh{0.5};
  ApMethod method{ApMethod::all_points};
  std::vector<ImageEntry> empty_images;
};

/// Rotated-AP evaluation with inshore/offshore splits.
///
/// An image belongs to a split through the scene tags of its ground truths;
/// images mixing inshore and offshore tags are rejected. Unspecified images
/// count toward the overall figure only. Predictions on unknown images are a
/// ValidationError listing the offenders.
EvalReport evaluate(std::span<const GroundTruthRecord> gts, std::span<const Detection> preds,
                    const EvalOptions& options = {});

/// Reference AP50 row of the published detector, as fractions.
struct ReferenceRow {
  double ap50{0.9182};
  double ap50_inshore{0.6627};
  double ap50_offshore{0.9626};
};

/// "key<TAB>value" lines.
void write_report(std::ostream& out, const EvalReport& report);

/// Gnuplot-friendly table: one block per split ("# split" header, then
/// "recall precision" rows), blocks separated by two blank lines.
void write_pr_table(std::ostream& out, const EvalReport& report);

}  // namespace obbkit
