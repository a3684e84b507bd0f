#pragma once

#include <Eigen/Core>
#include <span>
#include <utility>
#include <vector>

#include "obbkit/box.hpp"

namespace obbkit {

/// Weights of the classification, L1 and IoU terms of the matching cost.
struct MatchWeights {
  double lambda_cls{2.0};
  double lambda_l1{5.0};
  double lambda_iou{2.0};
};

struct FocalParams {
  double alpha{0.25};
  double gamma{2.0};
};

struct ImageSize {
  double width{0};
  double height{0};
};

struct CostOptions {
  MatchWeights weights;
  FocalParams focal;
  /// Include |d theta| / pi in the L1 term.
  bool l1_includes_angle{true};
};

/// Probabilities are clamped to [kProbEpsilon, 1 - kProbEpsilon] before logs.
inline constexpr double kProbEpsilon = 1e-8;

/// Focal classification cost for the ground-truth class:
/// alpha (1-p)^gamma (-log p) - (1-alpha) p^gamma (-log(1-p)).
/// Strictly decreasing in p; can be negative.
double focal_cls_cost(double prob_of_gt_class, double alpha = 0.25, double gamma = 2.0);

/// Focal loss of a positive sample: alpha (1-p)^gamma (-log p). Non-negative.
double focal_loss(double prob_of_gt_class, double alpha = 0.25, double gamma = 2.0);

/// Sum of |differences| of (cx/W, cy/H, w/W, h/H, theta/pi).
double l1_box_cost(const OrientedBoxd& pred, const OrientedBoxd& gt, ImageSize image, bool include_angle = true);

/// 1 - rotated IoU.
double iou_box_cost(const OrientedBoxd& pred, const OrientedBoxd& gt);

/// The three unweighted component matrices, each #preds x #gts.
struct CostComponents {
  Eigen::MatrixXd cls;
  Eigen::MatrixXd l1;
  Eigen::MatrixXd iou;
};

/// `preds[i].score` is read as the probability of the ground-truth class.
CostComponents cost_components(std::span<const Detection> preds, std::span<const GroundTruthRecord> gts,
                               ImageSize image, const CostOptions& options = {});

/// lambda_cls * cls + lambda_l1 * l1 + lambda_iou * iou, #preds x #gts.
Eigen::MatrixXd cost_matrix(std::span<const Detection> preds, std::span<const GroundTruthRecord> gts,
                            ImageSize image, const CostOptions& options = {});

struct CostBreakdown {
  double cls{0};
  double l1{0};
  double iou{0};
  double total{0};
};

struct MatchResult {
  /// (prediction index, ground-truth index), sorted by prediction index.
  std::vector<std::pair<int, int>> pairs;
  /// Per-pair components; empty when solved from a bare cost matrix.
  std::vector<CostBreakdown> breakdown;
  double total_cost{0};
};

/// Minimum-cost one-to-one assignment of min(rows, cols) pairs.
///
/// Shortest augmenting path with row/column potentials, O(n^2 m). Among equal
/// candidates the lowest row, then lowest column, is taken. Throws
/// ValidationError on non-finite entries.
MatchResult hungarian(const Eigen::MatrixXd& cost);

/// Builds the composite cost matrix for one image and solves it, filling the
/// per-pair breakdown.
MatchResult match(std::span<const Detection> preds, std::span<const GroundTruthRecord> gts, ImageSize image,
                  const CostOptions& options = {});

struct LossBreakdown {
  double cls_loss{0};
  double l1_loss{0};
  double iou_loss{0};
  double total{0};
};

/// One matched prediction/ground-truth pair entering the training loss.
struct MatchedSample {
  double prob{0};
  OrientedBoxd pred;
  OrientedBoxd gt;
};

/// Sum of each component over matched pairs divided by the number of objects
/// in the batch. The classification term is `focal_loss`.
LossBreakdown training_loss(std::span<const MatchedSample> pairs, int num_objects_in_batch, ImageSize image,
                            const CostOptions& options = {});

}  // namespace obbkit
