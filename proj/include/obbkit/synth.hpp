#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "obbkit/box.hpp"
#include "obbkit/pipeline.hpp"
#include "obbkit/roialign.hpp"

namespace obbkit {

/// Seeded generator whose output depends only on the seed (the mapping from
/// engine bits to reals is fixed here, not left to the standard library).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform in [lo, hi).
  double uniform(double lo = 0.0, double hi = 1.0) {
    const double unit = double(engine_() >> 11) * 0x1.0p-53;
    return lo + (hi - lo) * unit;
  }

  /// Uniform integer in [lo, hi].
  int uniform_int(int lo, int hi) { return lo + int(engine_() % std::uint64_t(hi - lo + 1)); }

  OrientedBoxd box(double lo_center, double hi_center, double lo_size, double hi_size);

 private:
  std::mt19937_64 engine_;
};

struct SynthOptions {
  std::uint64_t seed{0};
  int images{10};
  double image_size{512};
  int max_objects{5};
};

struct SynthDataset {
  std::vector<GroundTruthRecord> ground_truth;
  /// Jittered copies of most ground truths plus scattered false alarms.
  std::vector<Detection> predictions;
};

/// Ship-like boxes (elongated, arbitrary heading) on `images` images named
/// img0000, img0001, ...; each image is tagged inshore or offshore.
SynthDataset synth_dataset(const SynthOptions& options);

/// Ground truths re-labelled as detections with score 1.
std::vector<Detection> perfect_predictions(std::span<const GroundTruthRecord> gts);

/// Pyramid with levels at strides 4..32 covering the image, values in [-1, 1).
FeaturePyramidd random_pyramid(Rng& rng, double image_width, double image_height, int channels = 256,
                               int levels = 4);

/// Uniformly initialised weights for all stages, scaled by fan-in.
PipelineWeights random_pipeline_weights(Rng& rng, int interaction_dim, int pooler_resolution,
                                        int proposal_feature_rows = 0);

}  // namespace obbkit
