#include "cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "obbkit/evaluator.hpp"
#include "obbkit/geometry.hpp"
#include "obbkit/io.hpp"
#include "obbkit/matchloss.hpp"
#include "obbkit/pipeline.hpp"
#include "obbkit/synth.hpp"

namespace obbkit::cli {

namespace {

// Raised for unreadable/unwritable paths; reported like validation failures.
class InputError : public Error {
 public:
  using Error::Error;
};

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError(path + ": cannot open for reading");
  return in;
}

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InputError(path + ": cannot open for writing");
  return out;
}

// Runs a parser on a file, prefixing errors with the path.
template <typename Parse>
auto read_file(const std::string& path, Parse&& parse) {
  std::ifstream in = open_input(path);
  try {
    return parse(in);
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.what(), 0);
  } catch (const ValidationError& e) {
    throw ValidationError(path + ": " + e.what());
  }
}

// Writes to --out when given, stdout otherwise.
template <typename Write>
void emit(const std::string& path, std::ostream& stdout_stream, Write&& write) {
  if (path.empty()) {
    write(stdout_stream);
    return;
  }
  std::ofstream file = open_output(path);
  write(file);
  if (!file) throw InputError(path + ": write failed");
}

OrientedBoxd parse_inline_box(const std::string& text) {
  std::vector<double> values;
  std::stringstream ss(text);
  std::string field;
  while (std::getline(ss, field, ',')) {
    try {
      std::size_t used = 0;
      values.push_back(std::stod(field, &used));
      if (field.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument(field);
    } catch (const std::logic_error&) {
      throw ValidationError("malformed box '" + text + "': '" + field + "' is not a number");
    }
  }
  if (values.size() != 5) throw ValidationError("malformed box '" + text + "': expected cx,cy,w,h,theta");
  try {
    return make_box(values[0], values[1], values[2], values[3], values[4]);
  } catch (const ValidationError& e) {
    throw ValidationError("malformed box '" + text + "': " + e.what());
  }
}

const std::map<std::string, ApMethod> kMethods{{"all-points", ApMethod::all_points},
                                               {"eleven-point", ApMethod::eleven_point}};
const std::map<std::string, DecodeVariant> kDecodes{{"paper-literal", DecodeVariant::paper_literal},
                                                    {"rotation-matrix", DecodeVariant::rotation_matrix}};

struct EvalArgs {
  std::string gt, pred, out, curve_out;
  double iou_thresh{0.5};
  ApMethod method{ApMethod::all_points};
};

struct IouArgs {
  std::vector<std::string> a, b;
  std::string a_file, b_file, out;
};

struct MatchArgs {
  std::string gt, pred, out;
  MatchWeights weights;
  FocalParams focal;
  double image_width{512}, image_height{512};
  bool no_angle{false};
};

struct InferArgs {
  std::string pyramid, weights, out;
  int proposals{300};
  DecodeVariant decode{DecodeVariant::paper_literal};
  double score_thresh{0.0};
  int level{-1};
};

struct SynthArgs {
  std::uint64_t seed{0};
  int images{10};
  std::string out;
  double image_size{512};
  int max_objects{5};
  bool pyramid{false};
  double pyramid_size{64};
  bool weights{false};
  int interaction_dim{2};
  int pooler{2};
  int proposal_features{0};
};

void cmd_eval(const EvalArgs& args, std::ostream& out) {
  const auto gts = read_file(args.gt, [](std::istream& in) { return parse_ground_truth(in); });
  const auto preds = read_file(args.pred, [](std::istream& in) { return parse_predictions(in); });
  EvalOptions options;
  options.iou_thresh = args.iou_thresh;
  options.method = args.method;
  const EvalReport report = evaluate(gts, preds, options);
  emit(args.out, out, [&](std::ostream& s) { write_report(s, report); });
  if (!args.curve_out.empty()) emit(args.curve_out, out, [&](std::ostream& s) { write_pr_table(s, report); });
}

void cmd_iou(const IouArgs& args, std::ostream& out) {
  std::vector<OrientedBoxd> as, bs;
  for (const auto& text : args.a) as.push_back(parse_inline_box(text));
  for (const auto& text : args.b) bs.push_back(parse_inline_box(text));
  const auto parse = [](std::istream& in) { return parse_boxes(in); };
  if (!args.a_file.empty()) {
    const auto more = read_file(args.a_file, parse);
    as.insert(as.end(), more.begin(), more.end());
  }
  if (!args.b_file.empty()) {
    const auto more = read_file(args.b_file, parse);
    bs.insert(bs.end(), more.begin(), more.end());
  }
  if (as.empty() || bs.empty()) throw ValidationError("iou needs at least one box on each side (--a/--a-file, --b/--b-file)");
  const Eigen::MatrixXd m = iou_matrix(as, bs);
  emit(args.out, out, [&](std::ostream& s) {
    s << std::fixed << std::setprecision(6);
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      for (Eigen::Index j = 0; j < m.cols(); ++j) s << (j ? "\t" : "") << m(i, j);
      s << '\n';
    }
  });
}

void cmd_match(const MatchArgs& args, std::ostream& out) {
  const auto gts = read_file(args.gt, [](std::istream& in) { return parse_ground_truth(in); });
  const auto preds = read_file(args.pred, [](std::istream& in) { return parse_predictions(in); });
  std::map<std::string, std::pair<std::vector<Detection>, std::vector<GroundTruthRecord>>> images;
  for (const auto& p : preds) images[p.image_id].first.push_back(p);
  for (const auto& g : gts) images[g.image_id].second.push_back(g);

  CostOptions options;
  options.weights = args.weights;
  options.focal = args.focal;
  options.l1_includes_angle = !args.no_angle;
  const ImageSize image{args.image_width, args.image_height};

  emit(args.out, out, [&](std::ostream& s) {
    s << "image_id\tpred\tgt\tcls\tl1\tiou\tcost\n";
    for (const auto& [id, pair] : images) {
      const MatchResult result = match(pair.first, pair.second, image, options);
      for (std::size_t k = 0; k < result.pairs.size(); ++k) {
        const CostBreakdown& c = result.breakdown[k];
        s << id << '\t' << result.pairs[k].first << '\t' << result.pairs[k].second << '\t' << format_number(c.cls)
          << '\t' << format_number(c.l1) << '\t' << format_number(c.iou) << '\t' << format_number(c.total) << '\n';
      }
      s << id << "\ttotal\t\t\t\t\t" << format_number(result.total_cost) << '\n';
    }
  });
}

void cmd_infer(const InferArgs& args, std::ostream& out) {
  if (!(args.score_thresh >= 0.0 && args.score_thresh <= 1.0)) {
    throw ValidationError("--score-thresh must lie in [0, 1]");
  }
  const WeightStore store = read_file(args.weights, [](std::istream& in) { return load_weights(in); });
  PipelineWeights weights;
  try {
    weights = pipeline_weights_from_store(store);
  } catch (const ValidationError& e) {
    throw ValidationError(args.weights + ": " + e.what());
  }
  auto pyramids = read_file(args.pyramid, [](std::istream& in) { return parse_pyramids(in); });
  std::sort(pyramids.begin(), pyramids.end(),
            [](const PyramidRecord& a, const PyramidRecord& b) { return a.image_id < b.image_id; });

  InferenceOptions options;
  options.num_proposals = args.proposals;
  options.decode = args.decode;
  if (args.level >= 0) options.fixed_level = args.level;

  std::vector<Detection> detections;
  for (const auto& record : pyramids) {
    const DetectionBatch batch =
        run_inference(record.pyramid, record.image_width, record.image_height, weights, options);
    for (auto& d : batch.to_detections(record.image_id)) {
      if (d.score >= args.score_thresh) detections.push_back(std::move(d));
    }
  }
  emit(args.out, out, [&](std::ostream& s) { write_predictions(s, detections); });
}

void cmd_synth(const SynthArgs& args, std::ostream& out) {
  if (args.images < 0) throw ValidationError("--images must be non-negative");
  SynthOptions options;
  options.seed = args.seed;
  options.images = args.images;
  options.image_size = args.image_size;
  options.max_objects = args.max_objects;
  const SynthDataset data = synth_dataset(options);

  const std::vector<std::string> written = {args.out + ".gt.jsonl", args.out + ".pred.jsonl",
                                            args.out + ".self.pred.jsonl"};
  emit(written[0], out, [&](std::ostream& s) { write_ground_truth(s, data.ground_truth); });
  emit(written[1], out, [&](std::ostream& s) { write_predictions(s, data.predictions); });
  emit(written[2], out, [&](std::ostream& s) { write_predictions(s, perfect_predictions(data.ground_truth)); });
  for (const auto& path : written) out << path << '\n';

  // Independent streams so adding a fixture never changes the others.
  if (args.pyramid) {
    Rng rng(args.seed ^ 0x9e3779b97f4a7c15ULL);
    const std::string path = args.out + ".pyr.jsonl";
    emit(path, out, [&](std::ostream& s) {
      for (int i = 0; i < args.images; ++i) {
        char id[32];
        std::snprintf(id, sizeof id, "img%04d", i);
        write_pyramid(s, {id, args.pyramid_size, args.pyramid_size,
                          random_pyramid(rng, args.pyramid_size, args.pyramid_size)});
      }
    });
    out << path << '\n';
  }
  if (args.weights) {
    Rng rng(args.seed ^ 0xc2b2ae3d27d4eb4fULL);
    const std::string path = args.out + ".wts.json";
    const PipelineWeights w = random_pipeline_weights(rng, args.interaction_dim, args.pooler, args.proposal_features);
    emit(path, out, [&](std::ostream& s) { save_weights(s, to_weight_store(w)); });
    out << path << '\n';
  }
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Oriented-box detection toolkit: rotated IoU, set matching, inference and AP50 evaluation", "obbkit"};
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();

  EvalArgs eval;
  auto* eval_cmd = app.add_subcommand("eval", "Rotated AP50 with inshore/offshore splits");
  eval_cmd->add_option("--gt", eval.gt, "Ground truth (.gt.jsonl)")->required();
  eval_cmd->add_option("--pred", eval.pred, "Predictions (.pred.jsonl)")->required();
  eval_cmd->add_option("--out", eval.out, "Report path (default: stdout)");
  eval_cmd->add_option("--curve-out", eval.curve_out, "PR-curve table path");
  eval_cmd->add_option("--iou-thresh", eval.iou_thresh, "IoU for a true positive")->check(CLI::Range(0.0, 1.0));
  eval_cmd->add_option("--method", eval.method, "AP integration")
      ->transform(CLI::CheckedTransformer(kMethods, CLI::ignore_case))
      ->default_str("all-points");

  IouArgs iou;
  auto* iou_cmd = app.add_subcommand("iou", "Rotated IoU matrix between two box lists");
  iou_cmd->add_option("--a", iou.a, "Inline box cx,cy,w,h,theta (repeatable)");
  iou_cmd->add_option("--b", iou.b, "Inline box cx,cy,w,h,theta (repeatable)");
  iou_cmd->add_option("--a-file", iou.a_file, "Box file (one JSON box per line)");
  iou_cmd->add_option("--b-file", iou.b_file, "Box file (one JSON box per line)");
  iou_cmd->add_option("--out", iou.out, "Output path (default: stdout)");

  MatchArgs match_args;
  auto* match_cmd = app.add_subcommand("match", "Optimal prediction/ground-truth assignment per image");
  match_cmd->add_option("--gt", match_args.gt, "Ground truth (.gt.jsonl)")->required();
  match_cmd->add_option("--pred", match_args.pred, "Predictions; score is the class probability")->required();
  match_cmd->add_option("--out", match_args.out, "Output path (default: stdout)");
  match_cmd->add_option("--lambda-cls", match_args.weights.lambda_cls, "Classification weight")
      ->check(CLI::NonNegativeNumber);
  match_cmd->add_option("--lambda-l1", match_args.weights.lambda_l1, "L1 weight")->check(CLI::NonNegativeNumber);
  match_cmd->add_option("--lambda-iou", match_args.weights.lambda_iou, "IoU weight")->check(CLI::NonNegativeNumber);
  match_cmd->add_option("--focal-alpha", match_args.focal.alpha, "Focal alpha")->check(CLI::Range(0.0, 1.0));
  match_cmd->add_option("--focal-gamma", match_args.focal.gamma, "Focal gamma")->check(CLI::NonNegativeNumber);
  match_cmd->add_option("--image-width", match_args.image_width, "Image width for L1 normalisation")
      ->check(CLI::PositiveNumber);
  match_cmd->add_option("--image-height", match_args.image_height, "Image height for L1 normalisation")
      ->check(CLI::PositiveNumber);
  match_cmd->add_flag("--no-angle-l1", match_args.no_angle, "Leave theta out of the L1 term");

  InferArgs infer;
  auto* infer_cmd = app.add_subcommand("infer", "Run the refinement stack on feature pyramids");
  infer_cmd->add_option("--pyramid", infer.pyramid, "Feature pyramids (.pyr.jsonl)")->required();
  infer_cmd->add_option("--weights", infer.weights, "Weights (.wts.json)")->required();
  infer_cmd->add_option("--out", infer.out, "Predictions path (default: stdout)");
  infer_cmd->add_option("--proposals", infer.proposals, "Number of learnable proposals")
      ->check(CLI::PositiveNumber);
  infer_cmd->add_option("--decode", infer.decode, "Center update")
      ->transform(CLI::CheckedTransformer(kDecodes, CLI::ignore_case))
      ->default_str("paper-literal");
  // Range is checked in the command so an out-of-range value is a validation failure.
  infer_cmd->add_option("--score-thresh", infer.score_thresh, "Drop detections scoring below this");
  infer_cmd->add_option("--level", infer.level, "Pool every proposal from this pyramid index (-1: by size)");

  SynthArgs synth;
  auto* synth_cmd = app.add_subcommand("synth", "Write deterministic synthetic fixtures");
  synth_cmd->add_option("--seed", synth.seed, "Generator seed");
  synth_cmd->add_option("--images", synth.images, "Number of images");
  synth_cmd->add_option("--out", synth.out, "Output path prefix")->required();
  synth_cmd->add_option("--image-size", synth.image_size, "Square image side in px")->check(CLI::PositiveNumber);
  synth_cmd->add_option("--max-objects", synth.max_objects, "Objects per image upper bound")
      ->check(CLI::PositiveNumber);
  synth_cmd->add_flag("--pyramid", synth.pyramid, "Also write <out>.pyr.jsonl");
  synth_cmd->add_option("--pyramid-size", synth.pyramid_size, "Pyramid image side in px")
      ->check(CLI::PositiveNumber);
  synth_cmd->add_flag("--weights", synth.weights, "Also write <out>.wts.json");
  synth_cmd->add_option("--interaction-dim", synth.interaction_dim, "Dynamic-head interaction channels")
      ->check(CLI::PositiveNumber);
  synth_cmd->add_option("--pooler", synth.pooler, "RoIAlign output side")->check(CLI::PositiveNumber);
  synth_cmd->add_option("--proposal-features", synth.proposal_features, "Rows of learned proposal features")
      ->check(CLI::NonNegativeNumber);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitInvalid;
  }

  try {
    if (eval_cmd->parsed()) cmd_eval(eval, out);
    if (iou_cmd->parsed()) cmd_iou(iou, out);
    if (match_cmd->parsed()) cmd_match(match_args, out);
    if (infer_cmd->parsed()) cmd_infer(infer, out);
    if (synth_cmd->parsed()) cmd_synth(synth, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitInvalid;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return kExitInternal;
  }
  return kExitOk;
}

}  // namespace obbkit::cli
