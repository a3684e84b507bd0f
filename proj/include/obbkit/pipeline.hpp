#pragma once

#include <Eigen/Core>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "obbkit/box.hpp"
#include "obbkit/boxcode.hpp"
#include "obbkit/io.hpp"
#include "obbkit/roialign.hpp"

namespace obbkit {

/// Depth of the refinement stack.
inline constexpr int kNumStages = 6;
/// Regression outputs per proposal (dx, dy, dw, dh, dtheta).
inline constexpr int kDeltaWidth = 5;

/// Parameters of one refinement stage. Matrices are [out, in].
///
/// The parameter generator maps a proposal feature f (256) to
/// dynamic_weight * f + dynamic_bias, of length 2 * 256 * D. The first 256*D
/// values, read row-major, form the 256 x D kernel of the first 1x1 conv; the
/// remaining D*256 form the D x 256 kernel of the second.
struct DynamicHeadWeights {
  int interaction_dim{64};
  int pooler_resolution{7};

  Eigen::MatrixXd dynamic_weight;  // 2*256*D x 256
  Eigen::VectorXd dynamic_bias;    // 2*256*D
  Eigen::MatrixXd out_weight;      // 256 x R*R*256
  Eigen::VectorXd out_bias;        // 256
  Eigen::MatrixXd cls_weight;      // 1 x 256
  Eigen::VectorXd cls_bias;        // 1
  Eigen::MatrixXd reg_weight;      // 5 x 256
  Eigen::VectorXd reg_bias;        // 5

  int roi_bins() const { return pooler_resolution * pooler_resolution; }

  /// Throws ValidationError on any inconsistent shape or non-finite value.
  void validate() const;

  /// Zero-filled weights with consistent shapes.
  static DynamicHeadWeights zeros(int interaction_dim = 64, int pooler_resolution = 7);
};

/// Parameter paths of stage `stage` in a weight store:
/// stage{k}.dynamic.weight/.bias, stage{k}.out.weight/.bias,
/// stage{k}.cls.weight/.bias, stage{k}.reg.weight/.bias.
std::vector<std::string> stage_parameter_paths(int stage);

/// Optional learned proposal features, shape [N, 256].
inline constexpr const char* kProposalFeaturesPath = "proposal_features";

/// Interaction dim and pooler resolution are inferred from the array shapes.
DynamicHeadWeights head_weights_from_store(const WeightStore& store, int stage);
void add_head_weights(WeightStore& store, int stage, const DynamicHeadWeights& weights);

struct PipelineWeights {
  std::vector<DynamicHeadWeights> stages;
  /// When present, row i seeds proposal i instead of zeros.
  std::optional<Eigen::MatrixXd> proposal_features;
};

/// Reads all kNumStages stages; missing paths are reported by name.
PipelineWeights pipeline_weights_from_store(const WeightStore& store);
WeightStore to_weight_store(const PipelineWeights& weights);

/// Interaction of each proposal with its own RoI features.
///
/// proposal_features is n x 256; roi_features[i] is bins x 256 for proposal i.
/// Per proposal: generate the two kernels, roi * K1 -> ReLU -> * K2 -> ReLU,
/// flatten row-major, project to 256, ReLU. Rows are computed independently.
Eigen::MatrixXd dynamic_head_forward(const Eigen::MatrixXd& proposal_features,
                                     std::span<const Eigen::MatrixXd> roi_features, const DynamicHeadWeights& w);

struct HeadOutputs {
  Eigen::VectorXd logits;  // n
  Eigen::MatrixXd deltas;  // n x 5
};

HeadOutputs predict_heads(const Eigen::MatrixXd& object_features, const DynamicHeadWeights& w);

struct StageOutput {
  std::vector<OrientedBoxd> boxes;
  Eigen::VectorXd scores;
};

struct DetectionBatch {
  std::vector<OrientedBoxd> boxes;
  Eigen::VectorXd scores;    // sigmoid of the last stage's logits
  Eigen::MatrixXd features;  // n x 256 object features of the last stage
  std::vector<StageOutput> stages;

  std::vector<Detection> to_detections(const std::string& image_id, int class_id = 0) const;
};

struct InferenceOptions {
  int num_proposals{300};
  DecodeVariant decode{DecodeVariant::paper_literal};
  int sampling_ratio{2};
  /// Pool every proposal from this level instead of the size heuristic.
  std::optional<int> fixed_level;
};

/// Forward pass: initial proposals, then per stage RoIAlign -> dynamic head ->
/// heads -> decode. No score threshold and no suppression.
DetectionBatch run_inference(const FeaturePyramidd& pyramid, double image_width, double image_height,
                             const PipelineWeights& weights, const InferenceOptions& options = {});

}  // namespace obbkit
