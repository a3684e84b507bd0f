#include "obbkit/matchloss.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "obbkit/error.hpp"
#include "obbkit/geometry.hpp"

namespace obbkit {

namespace {

double clamp_prob(double p) {
  if (std::isnan(p)) throw ValidationError("probability must not be NaN");
  return std::clamp(p, kProbEpsilon, 1.0 - kProbEpsilon);
}

void require_image(ImageSize image) {
  if (!(image.width > 0) || !(image.height > 0)) throw ValidationError("image size must be positive");
}

}  // namespace

double focal_cls_cost(double prob_of_gt_class, double alpha, double gamma) {
  const double p = clamp_prob(prob_of_gt_class);
  const double pos = alpha * std::pow(1.0 - p, gamma) * -std::log(p);
  const double neg = (1.0 - alpha) * std::pow(p, gamma) * -std::log(1.0 - p);
  return pos - neg;
}

double focal_loss(double prob_of_gt_class, double alpha, double gamma) {
  const double p = clamp_prob(prob_of_gt_class);
  return alpha * std::pow(1.0 - p, gamma) * -std::log(p);
}

double l1_box_cost(const OrientedBoxd& pred, const OrientedBoxd& gt, ImageSize image, bool include_angle) {
  require_image(image);
  double cost = std::abs(pred.cx - gt.cx) / image.width + std::abs(pred.cy - gt.cy) / image.height +
                std::abs(pred.w - gt.w) / image.width + std::abs(pred.h - gt.h) / image.height;
  if (include_angle) cost += std::abs(pred.theta - gt.theta) / std::numbers::pi;
  return cost;
}

double iou_box_cost(const OrientedBoxd& pred, const OrientedBoxd& gt) { return 1.0 - rotated_iou(pred, gt); }

CostComponents cost_components(std::span<const Detection> preds, std::span<const GroundTruthRecord> gts,
                               ImageSize image, const CostOptions& options) {
  require_image(image);
  const auto rows = Eigen::Index(preds.size());
  const auto cols = Eigen::Index(gts.size());
  CostComponents c{Eigen::MatrixXd(rows, cols), Eigen::MatrixXd(rows, cols), Eigen::MatrixXd(rows, cols)};
  for (Eigen::Index i = 0; i < rows; ++i) {
    const Detection& pred = preds[std::size_t(i)];
    const double cls = focal_cls_cost(pred.score, options.focal.alpha, options.focal.gamma);
    for (Eigen::Index j = 0; j < cols; ++j) {
      const OrientedBoxd& gt = gts[std::size_t(j)].box;
      c.cls(i, j) = cls;
      c.l1(i, j) = l1_box_cost(pred.box, gt, image, options.l1_includes_angle);
      c.iou(i, j) = iou_box_cost(pred.box, gt);
    }
  }
  return c;
}

Eigen::MatrixXd cost_matrix(std::span<const Detection> preds, std::span<const GroundTruthRecord> gts,
                            ImageSize image, const CostOptions& options) {
  const CostComponents c = cost_components(preds, gts, image, options);
  const MatchWeights& w = options.weights;
  return w.lambda_cls * c.cls + w.lambda_l1 * c.l1 + w.lambda_iou * c.iou;
}

MatchResult hungarian(const Eigen::MatrixXd& cost) {
  if (!cost.allFinite()) throw ValidationError("cost matrix entries must be finite");
  MatchResult result;
  if (cost.rows() == 0 || cost.cols() == 0) return result;

  // The solver assigns every row of an n x m matrix with n <= m.
  const bool transposed = cost.rows() > cost.cols();
  const Eigen::MatrixXd a = transposed ? Eigen::MatrixXd(cost.transpose()) : cost;
  const int n = int(a.rows());
  const int m = int(a.cols());
  constexpr double inf = std::numeric_limits<double>::infinity();

  // 1-based potentials; column 0 is a virtual source.
  std::vector<double> u(std::size_t(n) + 1, 0.0), v(std::size_t(m) + 1, 0.0);
  std::vector<int> row_of_col(std::size_t(m) + 1, 0), way(std::size_t(m) + 1, 0);
  std::vector<double> min_slack(std::size_t(m) + 1);
  std::vector<char> used(std::size_t(m) + 1);

  for (int i = 1; i <= n; ++i) {
    row_of_col[0] = i;
    int col = 0;
    std::fill(min_slack.begin(), min_slack.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[std::size_t(col)] = 1;
      const int row = row_of_col[std::size_t(col)];
      double delta = inf;
      int next = 0;
      for (int j = 1; j <= m; ++j) {
        if (used[std::size_t(j)]) continue;
        const double slack = a(row - 1, j - 1) - u[std::size_t(row)] - v[std::size_t(j)];
        if (slack < min_slack[std::size_t(j)]) {
          min_slack[std::size_t(j)] = slack;
          way[std::size_t(j)] = col;
        }
        if (min_slack[std::size_t(j)] < delta) {
          delta = min_slack[std::size_t(j)];
          next = j;
        }
      }
      for (int j = 0; j <= m; ++j) {
        if (used[std::size_t(j)]) {
          u[std::size_t(row_of_col[std::size_t(j)])] += delta;
          v[std::size_t(j)] -= delta;
        } else {
          min_slack[std::size_t(j)] -= delta;
        }
      }
      col = next;
    } while (row_of_col[std::size_t(col)] != 0);
    do {
      const int prev = way[std::size_t(col)];
      row_of_col[std::size_t(col)] = row_of_col[std::size_t(prev)];
      col = prev;
    } while (col != 0);
  }

  for (int j = 1; j <= m; ++j) {
    const int row = row_of_col[std::size_t(j)];
    if (row == 0) continue;
    if (transposed) {
      result.pairs.emplace_back(j - 1, row - 1);
    } else {
      result.pairs.emplace_back(row - 1, j - 1);
    }
  }
  std::sort(result.pairs.begin(), result.pairs.end());
  // Sum the original entries rather than trusting the dual objective.
  for (const auto& [r, c] : result.pairs) result.total_cost += cost(r, c);
  return result;
}

MatchResult match(std::span<const Detection> preds, std::span<const GroundTruthRecord> gts, ImageSize image,
                  const CostOptions& options) {
  const CostComponents c = cost_components(preds, gts, image, options);
  const MatchWeights& w = options.weights;
  const Eigen::MatrixXd total = w.lambda_cls * c.cls + w.lambda_l1 * c.l1 + w.lambda_iou * c.iou;
  MatchResult result = hungarian(total);
  result.breakdown.reserve(result.pairs.size());
  for (const auto& [i, j] : result.pairs) {
    result.breakdown.push_back({c.cls(i, j), c.l1(i, j), c.iou(i, j), total(i, j)});
  }
  return result;
}

LossBreakdown training_loss(std::span<const MatchedSample> pairs, int num_objects_in_batch, ImageSize image,
                            const CostOptions& options) {
  if (num_objects_in_batch < 1) throw ValidationError("number of objects in the batch must be positive");
  require_image(image);
  LossBreakdown loss;
  for (const MatchedSample& s : pairs) {
    loss.cls_loss += focal_loss(s.prob, options.focal.alpha, options.focal.gamma);
    loss.l1_loss += l1_box_cost(s.pred, s.gt, image, options.l1_includes_angle);
    loss.iou_loss += iou_box_cost(s.pred, s.gt);
  }
  const double n = num_objects_in_batch;
  loss.cls_loss /= n;
  loss.l1_loss /= n;
  loss.iou_loss /= n;
  const MatchWeights& w = options.weights;
  loss.total = w.lambda_cls * loss.cls_loss + w.lambda_l1 * loss.l1_loss + w.lambda_iou * loss.iou_loss;
  return loss;
}

}  // namespace obbkit
