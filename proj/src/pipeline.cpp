#include "obbkit/pipeline.hpp"

#include <cmath>

#include "obbkit/error.hpp"

namespace obbkit {

namespace {

constexpr int kWidth = kProposalFeatureWidth;

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

void expect_shape(const Eigen::MatrixXd& m, Eigen::Index rows, Eigen::Index cols, const char* what) {
  if (m.rows() != rows || m.cols() != cols) {
    throw ValidationError(std::string(what) + " has shape " + std::to_string(m.rows()) + "x" +
                          std::to_string(m.cols()) + ", expected " + std::to_string(rows) + "x" +
                          std::to_string(cols));
  }
  if (!m.allFinite()) throw ValidationError(std::string(what) + " contains non-finite values");
}

void expect_shape(const Eigen::VectorXd& v, Eigen::Index size, const char* what) {
  if (v.size() != size) {
    throw ValidationError(std::string(what) + " has length " + std::to_string(v.size()) + ", expected " +
                          std::to_string(size));
  }
  if (!v.allFinite()) throw ValidationError(std::string(what) + " contains non-finite values");
}

std::string stage_prefix(int stage) { return "stage" + std::to_string(stage) + "."; }

Eigen::MatrixXd matrix_from(const WeightStore& store, const std::string& name) {
  const WeightArray& a = store.at(name);
  if (a.shape.size() != 2) throw ValidationError("weight '" + name + "' must be 2-D");
  return Eigen::Map<const RowMatrix>(a.data.data(), Eigen::Index(a.shape[0]), Eigen::Index(a.shape[1]));
}

Eigen::VectorXd vector_from(const WeightStore& store, const std::string& name) {
  const WeightArray& a = store.at(name);
  if (a.shape.size() != 1) throw ValidationError("weight '" + name + "' must be 1-D");
  return Eigen::Map<const Eigen::VectorXd>(a.data.data(), Eigen::Index(a.shape[0]));
}

WeightArray array_from(const Eigen::MatrixXd& m) {
  const RowMatrix row_major = m;
  return {{m.rows(), m.cols()}, std::vector<double>(row_major.data(), row_major.data() + row_major.size())};
}

WeightArray array_from(const Eigen::VectorXd& v) {
  return {{v.size()}, std::vector<double>(v.data(), v.data() + v.size())};
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

void DynamicHeadWeights::validate() const {
  if (interaction_dim < 1 || pooler_resolution < 1) {
    throw ValidationError("interaction dim and pooler resolution must be positive");
  }
  const Eigen::Index generated = Eigen::Index(2) * kWidth * interaction_dim;
  expect_shape(dynamic_weight, generated, kWidth, "dynamic.weight");
  expect_shape(dynamic_bias, generated, "dynamic.bias");
  expect_shape(out_weight, kWidth, Eigen::Index(roi_bins()) * kWidth, "out.weight");
  expect_shape(out_bias, kWidth, "out.bias");
  expect_shape(cls_weight, 1, kWidth, "cls.weight");
  expect_shape(cls_bias, 1, "cls.bias");
  expect_shape(reg_weight, kDeltaWidth, kWidth, "reg.weight");
  expect_shape(reg_bias, kDeltaWidth, "reg.bias");
}

DynamicHeadWeights DynamicHeadWeights::zeros(int interaction_dim, int pooler_resolution) {
  DynamicHeadWeights w;
  w.interaction_dim = interaction_dim;
  w.pooler_resolution = pooler_resolution;
  const Eigen::Index generated = Eigen::Index(2) * kWidth * interaction_dim;
  w.dynamic_weight = Eigen::MatrixXd::Zero(generated, kWidth);
  w.dynamic_bias = Eigen::VectorXd::Zero(generated);
  w.out_weight = Eigen::MatrixXd::Zero(kWidth, Eigen::Index(w.roi_bins()) * kWidth);
  w.out_bias = Eigen::VectorXd::Zero(kWidth);
  w.cls_weight = Eigen::MatrixXd::Zero(1, kWidth);
  w.cls_bias = Eigen::VectorXd::Zero(1);
  w.reg_weight = Eigen::MatrixXd::Zero(kDeltaWidth, kWidth);
  w.reg_bias = Eigen::VectorXd::Zero(kDeltaWidth);
  return w;
}

std::vector<std::string> stage_parameter_paths(int stage) {
  const std::string p = stage_prefix(stage);
  return {p + "dynamic.weight", p + "dynamic.bias", p + "out.weight", p + "out.bias",
          p + "cls.weight",     p + "cls.bias",     p + "reg.weight", p + "reg.bias"};
}

DynamicHeadWeights head_weights_from_store(const WeightStore& store, int stage) {
  const std::vector<std::string> paths = stage_parameter_paths(stage);
  store.require(paths);
  DynamicHeadWeights w;
  w.dynamic_weight = matrix_from(store, paths[0]);
  w.dynamic_bias = vector_from(store, paths[1]);
  w.out_weight = matrix_from(store, paths[2]);
  w.out_bias = vector_from(store, paths[3]);
  w.cls_weight = matrix_from(store, paths[4]);
  w.cls_bias = vector_from(store, paths[5]);
  w.reg_weight = matrix_from(store, paths[6]);
  w.reg_bias = vector_from(store, paths[7]);

  const Eigen::Index generated = w.dynamic_weight.rows();
  if (generated % (2 * kWidth) != 0 || generated == 0) {
    throw ValidationError(paths[0] + " must have 2*256*D rows");
  }
  w.interaction_dim = int(generated / (2 * kWidth));
  const Eigen::Index bins = w.out_weight.cols() / kWidth;
  w.pooler_resolution = int(std::lround(std::sqrt(double(bins))));
  if (w.out_weight.cols() % kWidth != 0 || Eigen::Index(w.pooler_resolution) * w.pooler_resolution != bins) {
    throw ValidationError(paths[2] + " must have R*R*256 columns");
  }
  try {
    w.validate();
  } catch (const ValidationError& e) {
    throw ValidationError(stage_prefix(stage) + e.what());
  }
  return w;
}

void add_head_weights(WeightStore& store, int stage, const DynamicHeadWeights& w) {
  const std::vector<std::string> paths = stage_parameter_paths(stage);
  store.insert(paths[0], array_from(w.dynamic_weight));
  store.insert(paths[1], array_from(w.dynamic_bias));
  store.insert(paths[2], array_from(w.out_weight));
  store.insert(paths[3], array_from(w.out_bias));
  store.insert(paths[4], array_from(w.cls_weight));
  store.insert(paths[5], array_from(w.cls_bias));
  store.insert(paths[6], array_from(w.reg_weight));
  store.insert(paths[7], array_from(w.reg_bias));
}

PipelineWeights pipeline_weights_from_store(const WeightStore& store) {
  std::vector<std::string> all;
  for (int s = 0; s < kNumStages; ++s) {
    for (auto& p : stage_parameter_paths(s)) all.push_back(std::move(p));
  }
  store.require(all);

  PipelineWeights weights;
  for (int s = 0; s < kNumStages; ++s) weights.stages.push_back(head_weights_from_store(store, s));
  if (store.contains(kProposalFeaturesPath)) {
    Eigen::MatrixXd features = matrix_from(store, kProposalFeaturesPath);
    if (features.cols() != kWidth) throw ValidationError("proposal_features must have 256 columns");
    weights.proposal_features = std::move(features);
  }
  return weights;
}

WeightStore to_weight_store(const PipelineWeights& weights) {
  WeightStore store;
  for (std::size_t s = 0; s < weights.stages.size(); ++s) add_head_weights(store, int(s), weights.stages[s]);
  if (weights.proposal_features) store.insert(kProposalFeaturesPath, array_from(*weights.proposal_features));
  return store;
}

Eigen::MatrixXd dynamic_head_forward(const Eigen::MatrixXd& proposal_features,
                                     std::span<const Eigen::MatrixXd> roi_features, const DynamicHeadWeights& w) {
  w.validate();
  const Eigen::Index n = proposal_features.rows();
  if (n < 1) throw ValidationError("dynamic head needs at least one proposal");
  if (proposal_features.cols() != kWidth) throw ValidationError("proposal features must have 256 columns");
  if (Eigen::Index(roi_features.size()) != n) {
    throw ValidationError("one RoI feature block per proposal is required");
  }
  const Eigen::Index bins = w.roi_bins();
  const Eigen::Index dim = w.interaction_dim;

  Eigen::MatrixXd out(n, kWidth);
  Eigen::VectorXd feature(kWidth);
  Eigen::VectorXd params(w.dynamic_bias.size());
  RowMatrix mixed(bins, kWidth);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::MatrixXd& roi = roi_features[std::size_t(i)];
    if (roi.rows() != bins || roi.cols() != kWidth) {
      throw ValidationError("RoI features must be bins x 256 (" + std::to_string(bins) + " x 256)");
    }
    feature = proposal_features.row(i).transpose();
    params.noalias() = w.dynamic_weight * feature;
    params += w.dynamic_bias;
    const Eigen::Map<const RowMatrix> first(params.data(), kWidth, dim);
    const Eigen::Map<const RowMatrix> second(params.data() + kWidth * dim, dim, kWidth);

    const Eigen::MatrixXd hidden = (roi * first).cwiseMax(0.0);
    mixed.noalias() = hidden * second;
    mixed = mixed.cwiseMax(0.0);

    const Eigen::Map<const Eigen::VectorXd> flat(mixed.data(), bins * kWidth);
    out.row(i) = (w.out_weight * flat + w.out_bias).cwiseMax(0.0).transpose();
  }
  return out;
}

HeadOutputs predict_heads(const Eigen::MatrixXd& object_features, const DynamicHeadWeights& w) {
  w.validate();
  if (object_features.cols() != kWidth) throw ValidationError("object features must have 256 columns");
  const Eigen::Index n = object_features.rows();
  HeadOutputs out{Eigen::VectorXd(n), Eigen::MatrixXd(n, kDeltaWidth)};
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::VectorXd f = object_features.row(i).transpose();
    out.logits(i) = w.cls_weight.row(0).dot(f) + w.cls_bias(0);
    out.deltas.row(i) = (w.reg_weight * f + w.reg_bias).transpose();
  }
  return out;
}

std::vector<Detection> DetectionBatch::to_detections(const std::string& image_id, int class_id) const {
  std::vector<Detection> out;
  out.reserve(boxes.size());
  for (std::size_t i = 0; i < boxes.size(); ++i) out.push_back({boxes[i], scores(Eigen::Index(i)), class_id, image_id});
  return out;
}

DetectionBatch run_inference(const FeaturePyramidd& pyramid, double image_width, double image_height,
                             const PipelineWeights& weights, const InferenceOptions& options) {
  if (int(weights.stages.size()) != kNumStages) {
    throw ValidationError("expected weights for " + std::to_string(kNumStages) + " stages, got " +
                          std::to_string(weights.stages.size()));
  }
  if (pyramid.channels() != kWidth) throw ValidationError("pyramid must have 256 channels");
  if (options.fixed_level && (*options.fixed_level < 0 || *options.fixed_level >= pyramid.num_levels())) {
    throw ValidationError("fixed pyramid level out of range");
  }

  ProposalSet proposals = init_proposals(options.num_proposals, image_width, image_height);
  const auto n = Eigen::Index(options.num_proposals);
  if (weights.proposal_features) {
    if (weights.proposal_features->rows() < n) {
      throw ValidationError("proposal_features holds fewer rows than the requested proposal count");
    }
    proposals.features = weights.proposal_features->topRows(n);
  }

  DetectionBatch batch;
  std::vector<OrientedBoxd> boxes = std::move(proposals.boxes);
  Eigen::MatrixXd features = std::move(proposals.features);
  std::vector<Eigen::MatrixXd> rois(static_cast<std::size_t>(n));
  for (const DynamicHeadWeights& w : weights.stages) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const OrientedBoxd& box = boxes[std::size_t(i)];
      const int level = options.fixed_level.value_or(assign_fpn_level(box, pyramid.num_levels()));
      rois[std::size_t(i)] =
          rotated_roi_align(pyramid.level(level), box, w.pooler_resolution, w.pooler_resolution, options.sampling_ratio)
              .transpose();
    }
    features = dynamic_head_forward(features, rois, w);
    const HeadOutputs heads = predict_heads(features, w);

    StageOutput stage;
    stage.scores = heads.logits.unaryExpr([](double x) { return sigmoid(x); });
    for (Eigen::Index i = 0; i < n; ++i) {
      const BoxDeltasd d{heads.deltas(i, 0), heads.deltas(i, 1), heads.deltas(i, 2), heads.deltas(i, 3),
                         heads.deltas(i, 4)};
      boxes[std::size_t(i)] = decode(boxes[std::size_t(i)], d, options.decode);
    }
    stage.boxes = boxes;
    batch.stages.push_back(std::move(stage));
  }

  batch.boxes = std::move(boxes);
  batch.scores = batch.stages.back().scores;
  batch.features = std::move(features);
  return batch;
}

}  // namespace obbkit
