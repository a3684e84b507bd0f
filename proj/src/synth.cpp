#include "obbkit/synth.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>

namespace obbkit {

namespace {

std::string image_name(int index) {
  char name[32];
  std::snprintf(name, sizeof name, "img%04d", index);
  return name;
}

Eigen::MatrixXd uniform_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols, double bound) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = rng.uniform(-bound, bound);
  }
  return m;
}

}  // namespace

OrientedBoxd Rng::box(double lo_center, double hi_center, double lo_size, double hi_size) {
  const double cx = uniform(lo_center, hi_center);
  const double cy = uniform(lo_center, hi_center);
  const double w = uniform(lo_size, hi_size);
  const double h = uniform(lo_size, hi_size);
  const double theta = uniform(-std::numbers::pi / 2, std::numbers::pi / 2);
  return make_box(cx, cy, w, h, theta);
}

SynthDataset synth_dataset(const SynthOptions& options) {
  Rng rng(options.seed);
  SynthDataset data;
  const double size = options.image_size;
  for (int i = 0; i < options.images; ++i) {
    const std::string id = image_name(i);
    const Scene scene = rng.uniform() < 0.5 ? Scene::inshore : Scene::offshore;
    const int objects = rng.uniform_int(1, std::max(1, options.max_objects));
    for (int k = 0; k < objects; ++k) {
      const double length = rng.uniform(0.04, 0.12) * size;
      const double beam = length * rng.uniform(0.2, 0.45);
      const double cx = rng.uniform(0.1, 0.9) * size;
      const double cy = rng.uniform(0.1, 0.9) * size;
      const double heading = rng.uniform(-std::numbers::pi / 2, std::numbers::pi / 2);
      const OrientedBoxd ship = make_box(cx, cy, length, beam, heading);
      data.ground_truth.push_back({ship, 0, id, scene});

      if (rng.uniform() < 0.85) {
        // Braced initialisation fixes the order of the generator calls.
        const double jitter[5] = {rng.uniform(-0.1, 0.1), rng.uniform(-0.1, 0.1), rng.uniform(0.9, 1.1),
                                  rng.uniform(0.9, 1.1), rng.uniform(-0.1, 0.1)};
        const OrientedBoxd jittered = make_box(ship.cx + jitter[0] * beam, ship.cy + jitter[1] * beam,
                                               ship.w * jitter[2], ship.h * jitter[3], ship.theta + jitter[4]);
        data.predictions.push_back({jittered, rng.uniform(0.4, 1.0), 0, id});
      }
    }
    const int false_alarms = rng.uniform_int(0, 2);
    for (int k = 0; k < false_alarms; ++k) {
      const double length = rng.uniform(0.04, 0.12) * size;
      const double beam = length * rng.uniform(0.2, 0.45);
      const double cx = rng.uniform(0.1, 0.9) * size;
      const double cy = rng.uniform(0.1, 0.9) * size;
      const double heading = rng.uniform(-std::numbers::pi / 2, std::numbers::pi / 2);
      const OrientedBoxd clutter = make_box(cx, cy, length, beam, heading);
      data.predictions.push_back({clutter, rng.uniform(0.0, 0.7), 0, id});
    }
  }
  return data;
}

std::vector<Detection> perfect_predictions(std::span<const GroundTruthRecord> gts) {
  std::vector<Detection> out;
  out.reserve(gts.size());
  for (const auto& gt : gts) out.push_back({gt.box, 1.0, gt.class_id, gt.image_id});
  return out;
}

FeaturePyramidd random_pyramid(Rng& rng, double image_width, double image_height, int channels, int levels) {
  std::vector<FeatureMapd> maps;
  for (int level = 0; level < levels; ++level) {
    const double stride = double(1 << (kLowestPyramidLevel + level));
    const int h = std::max(1, int(std::ceil(image_height / stride)));
    const int w = std::max(1, int(std::ceil(image_width / stride)));
    maps.emplace_back(channels, h, w, stride, uniform_matrix(rng, channels, Eigen::Index(h) * w, 1.0));
  }
  return FeaturePyramidd(std::move(maps));
}

PipelineWeights random_pipeline_weights(Rng& rng, int interaction_dim, int pooler_resolution,
                                        int proposal_feature_rows) {
  constexpr int width = kProposalFeatureWidth;
  PipelineWeights weights;
  for (int s = 0; s < kNumStages; ++s) {
    DynamicHeadWeights w = DynamicHeadWeights::zeros(interaction_dim, pooler_resolution);
    const double in_bound = 1.0 / std::sqrt(double(width));
    const double out_bound = 1.0 / std::sqrt(double(w.roi_bins()) * width);
    w.dynamic_weight = uniform_matrix(rng, w.dynamic_weight.rows(), width, in_bound);
    w.dynamic_bias = uniform_matrix(rng, w.dynamic_bias.size(), 1, in_bound);
    w.out_weight = uniform_matrix(rng, width, w.out_weight.cols(), out_bound);
    w.out_bias = uniform_matrix(rng, width, 1, out_bound);
    w.cls_weight = uniform_matrix(rng, 1, width, in_bound);
    w.cls_bias = uniform_matrix(rng, 1, 1, in_bound);
    w.reg_weight = uniform_matrix(rng, kDeltaWidth, width, 0.1 * in_bound);
    w.reg_bias = uniform_matrix(rng, kDeltaWidth, 1, 0.1 * in_bound);
    weights.stages.push_back(std::move(w));
  }
  if (proposal_feature_rows > 0) weights.proposal_features = uniform_matrix(rng, proposal_feature_rows, width, 1.0);
  return weights;
}

}  // namespace obbkit
