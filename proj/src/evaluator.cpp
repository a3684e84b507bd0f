#include "obbkit/evaluator.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <optional>
#include <ostream>
#include <set>

#include "obbkit/error.hpp"
#include "obbkit/geometry.hpp"
#include "obbkit/io.hpp"

namespace obbkit {

namespace {

// Indices of `dets` by descending score, ties in input order.
std::vector<std::size_t> score_order(std::span<const Detection> dets) {
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return dets[a].score > dets[b].score; });
  return order;
}

SplitResult score_split(const std::vector<bool>& ranked_flags, int n_gt, ApMethod method) {
  SplitResult split;
  split.counts.n_gt = n_gt;
  split.counts.n_det = int(ranked_flags.size());
  split.counts.n_tp = int(std::count(ranked_flags.begin(), ranked_flags.end(), true));
  split.curve = pr_curve(ranked_flags, n_gt);
  split.ap = average_precision(split.curve, method);
  return split;
}

}  // namespace

std::vector<bool> match_detections(std::span<const Detection> dets, std::span<const GroundTruthRecord> gts,
                                   double iou_thresh) {
  std::vector<bool> flags(dets.size(), false);
  std::vector<bool> taken(gts.size(), false);
  for (const std::size_t d : score_order(dets)) {
    double best_iou = -1.0;
    std::optional<std::size_t> best;
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (taken[g] || gts[g].class_id != dets[d].class_id) continue;
      const double iou = rotated_iou(dets[d].box, gts[g].box);
      if (iou >= iou_thresh && iou > best_iou) {
        best_iou = iou;
        best = g;
      }
    }
    if (best) {
      taken[*best] = true;
      flags[d] = true;
    }
  }
  return flags;
}

PRCurve pr_curve(const std::vector<bool>& ranked_flags, int n_gt) {
  if (n_gt < 0) throw ValidationError("ground-truth count must be non-negative");
  PRCurve curve;
  if (n_gt == 0) return curve;
  curve.points.reserve(ranked_flags.size());
  int tp = 0;
  for (std::size_t k = 0; k < ranked_flags.size(); ++k) {
    if (ranked_flags[k]) ++tp;
    curve.points.push_back({double(tp) / n_gt, double(tp) / double(k + 1)});
  }
  return curve;
}

double average_precision(const PRCurve& curve, ApMethod method) {
  const auto& pts = curve.points;
  if (pts.empty()) return 0.0;

  // envelope[k] = max precision over points k..end
  std::vector<double> envelope(pts.size());
  double running = 0.0;
  for (std::size_t k = pts.size(); k-- > 0;) {
    running = std::max(running, pts[k].precision);
    envelope[k] = running;
  }

  if (method == ApMethod::eleven_point) {
    double sum = 0.0;
    std::size_t k = 0;
    for (int i = 0; i <= 10; ++i) {
      const double level = i / 10.0;
      while (k < pts.size() && pts[k].recall < level) ++k;
      if (k < pts.size()) sum += envelope[k];
    }
    return sum / 11.0;
  }

  // Consecutive recall steps that share an envelope value are merged into one
  // rectangle, so a perfect curve integrates to exactly 1.
  double area = 0.0;
  double run_from = 0.0;
  double run_to = 0.0;
  double run_env = 0.0;
  for (std::size_t k = 0; k < pts.size(); ++k) {
    if (pts[k].recall <= run_to) continue;
    if (envelope[k] != run_env) {
      area += (run_to - run_from) * run_env;
      run_from = run_to;
      run_env = envelope[k];
    }
    run_to = pts[k].recall;
  }
  area += (run_to - run_from) * run_env;
  return std::clamp(area, 0.0, 1.0);
}

EvalReport evaluate(std::span<const GroundTruthRecord> gts, std::span<const Detection> preds,
                    const EvalOptions& options) {
  if (!(options.iou_thresh >= 0.0 && options.iou_thresh <= 1.0)) {
    throw ValidationError("IoU threshold must lie in [0, 1]");
  }

  struct Image {
    std::vector<GroundTruthRecord> gts;
    std::vector<std::size_t> preds;  // indices into `preds`
    Scene scene{Scene::unspecified};
  };
  std::map<std::string, Image> images;

  for (const auto& gt : gts) {
    Image& image = images[gt.image_id];
    if (gt.scene != Scene::unspecified) {
      if (image.scene != Scene::unspecified && image.scene != gt.scene) {
        throw ValidationError("image '" + gt.image_id + "' mixes inshore and offshore ground truths");
      }
      image.scene = gt.scene;
    }
    image.gts.push_back(gt);
  }
  for (const auto& entry : options.empty_images) {
    Image& image = images[entry.image_id];
    if (image.scene == Scene::unspecified) image.scene = entry.scene;
  }

  std::set<std::string> unknown;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const auto it = images.find(preds[i].image_id);
    if (it == images.end()) {
      unknown.insert(preds[i].image_id);
    } else {
      it->second.preds.push_back(i);
    }
  }
  if (!unknown.empty()) {
    std::string list;
    for (const auto& id : unknown) list += (list.empty() ? "" : ", ") + id;
    throw ValidationError("predictions reference images absent from the ground truth: " + list);
  }

  std::vector<bool> flags(preds.size(), false);
  std::vector<Scene> scene_of(preds.size(), Scene::unspecified);
  int gt_overall = 0, gt_inshore = 0, gt_offshore = 0;
  for (const auto& [id, image] : images) {
    std::vector<Detection> local;
    local.reserve(image.preds.size());
    for (const std::size_t i : image.preds) local.push_back(preds[i]);
    const std::vector<bool> local_flags = match_detections(local, image.gts, options.iou_thresh);
    for (std::size_t k = 0; k < image.preds.size(); ++k) {
      flags[image.preds[k]] = local_flags[k];
      scene_of[image.preds[k]] = image.scene;
    }
    const int n = int(image.gts.size());
    gt_overall += n;
    if (image.scene == Scene::inshore) gt_inshore += n;
    if (image.scene == Scene::offshore) gt_offshore += n;
  }

  std::vector<bool> ranked, ranked_inshore, ranked_offshore;
  for (const std::size_t i : score_order(preds)) {
    ranked.push_back(flags[i]);
    if (scene_of[i] == Scene::inshore) ranked_inshore.push_back(flags[i]);
    if (scene_of[i] == Scene::offshore) ranked_offshore.push_back(flags[i]);
  }

  EvalReport report;
  report.overall = score_split(ranked, gt_overall, options.method);
  report.inshore = score_split(ranked_inshore, gt_inshore, options.method);
  report.offshore = score_split(ranked_offshore, gt_offshore, options.method);
  return report;
}

void write_report(std::ostream& out, const EvalReport& report) {
  const auto counts = [&](const char* suffix, const EvalCounts& c) {
    out << "n_tp" << suffix << '\t' << c.n_tp << '\n';
    out << "n_gt" << suffix << '\t' << c.n_gt << '\n';
    out << "n_det" << suffix << '\t' << c.n_det << '\n';
  };
  out << "ap50\t" << format_number(report.ap50()) << '\n';
  out << "ap50_inshore\t" << format_number(report.ap50_inshore()) << '\n';
  out << "ap50_offshore\t" << format_number(report.ap50_offshore()) << '\n';
  counts("", report.overall.counts);
  counts("_inshore", report.inshore.counts);
  counts("_offshore", report.offshore.counts);
  const ReferenceRow reference;
  out << "reference_ap50\t" << format_number(reference.ap50) << '\n';
  out << "reference_ap50_inshore\t" << format_number(reference.ap50_inshore) << '\n';
  out << "reference_ap50_offshore\t" << format_number(reference.ap50_offshore) << '\n';
}

void write_pr_table(std::ostream& out, const EvalReport& report) {
  const auto block = [&](const char* name, const SplitResult& split) {
    out << "# " << name << " ap=" << format_number(split.ap) << "\n# recall precision\n";
    for (const auto& p : split.curve.points) out << format_number(p.recall) << ' ' << format_number(p.precision) << '\n';
  };
  block("overall", report.overall);
  out << "\n\n";
  block("inshore", report.inshore);
  out << "\n\n";
  block("offshore", report.offshore);
}

}  // namespace obbkit
