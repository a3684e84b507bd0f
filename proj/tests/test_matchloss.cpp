#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <limits>
#include <numbers>

#include "obbkit/geometry.hpp"
#include "obbkit/matchloss.hpp"
#include "obbkit/synth.hpp"
#include "oracles.hpp"

using namespace obbkit;
constexpr double pi = std::numbers::pi;

namespace {

Eigen::MatrixXd random_matrix(Rng& rng, int rows, int cols) {
  Eigen::MatrixXd m(rows, cols);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) m(i, j) = rng.uniform(-5, 5);
  }
  return m;
}

}  // namespace

TEST_CASE("focal costs by hand") {
  const double p = 0.3;
  const double expected = 0.25 * 0.49 * -std::log(0.3) - 0.75 * 0.09 * -std::log(0.7);
  CHECK(focal_cls_cost(p) == doctest::Approx(expected).epsilon(1e-14));
  CHECK(focal_loss(p) == doctest::Approx(0.25 * 0.49 * -std::log(0.3)).epsilon(1e-14));
  CHECK(focal_cls_cost(0.3, 1.0, 0.0) == doctest::Approx(-std::log(0.3)).epsilon(1e-14));
  CHECK(focal_cls_cost(0.5) == doctest::Approx(-0.125 * std::log(2.0)).epsilon(1e-14));
}

TEST_CASE("focal_cls_cost is decreasing and finite at the ends") {
  double prev = focal_cls_cost(0.0);
  CHECK(std::isfinite(prev));
  for (int i = 1; i <= 100; ++i) {
    const double c = focal_cls_cost(i / 100.0);
    CHECK(c < prev);
    prev = c;
  }
  CHECK(std::isfinite(focal_cls_cost(1.0)));
  CHECK(focal_cls_cost(1.0) == focal_cls_cost(1.0 - kProbEpsilon));
  CHECK(focal_loss(1.0) >= 0.0);
  CHECK(focal_loss(1.0) < 1e-15);
  CHECK_THROWS_AS(focal_cls_cost(std::numeric_limits<double>::quiet_NaN()), ValidationError);
}

TEST_CASE("l1_box_cost normalises each field") {
  const ImageSize image{100, 50};
  const OrientedBoxd a = make_box(10.0, 10.0, 20.0, 10.0, 0.2);
  const OrientedBoxd b = make_box(20.0, 15.0, 10.0, 20.0, -0.3);
  const double expected = 10.0 / 100 + 5.0 / 50 + 10.0 / 100 + 10.0 / 50 + 0.5 / pi;
  CHECK(l1_box_cost(a, b, image) == doctest::Approx(expected).epsilon(1e-14));
  CHECK(l1_box_cost(a, b, image, false) == doctest::Approx(expected - 0.5 / pi).epsilon(1e-14));
  CHECK(l1_box_cost(a, a, image) == 0.0);
  CHECK_THROWS_AS(l1_box_cost(a, b, ImageSize{0, 50}), ValidationError);
}

TEST_CASE("iou_box_cost") {
  const OrientedBoxd a = make_box(0.0, 0.0, 2.0, 2.0, 0.0);
  CHECK(iou_box_cost(a, a) == 0.0);
  CHECK(iou_box_cost(a, make_box(1.0, 0.0, 2.0, 2.0, 0.0)) == doctest::Approx(2.0 / 3.0));
  CHECK(iou_box_cost(a, make_box(0.0, 0.0, 2.0, 2.0, pi / 4)) == doctest::Approx(0.29289).epsilon(1e-5));
}

TEST_CASE("l1_box_cost matches a field loop on random pairs") {
  Rng rng(19);
  const ImageSize image{640, 480};
  for (int i = 0; i < 500; ++i) {
    const OrientedBoxd a = rng.box(0, 640, 1, 100);
    const OrientedBoxd b = rng.box(0, 640, 1, 100);
    const double fa[5] = {a.cx / 640, a.cy / 480, a.w / 640, a.h / 480, a.theta / pi};
    const double fb[5] = {b.cx / 640, b.cy / 480, b.w / 640, b.h / 480, b.theta / pi};
    double sum = 0;
    for (int k = 0; k < 5; ++k) sum += std::abs(fa[k] - fb[k]);
    CHECK(l1_box_cost(a, b, image) == doctest::Approx(sum).epsilon(1e-12));
  }
}

TEST_CASE("cost_matrix is the weighted sum of its components") {
  Rng rng(9);
  const ImageSize image{64, 48};
  std::vector<Detection> preds;
  std::vector<GroundTruthRecord> gts;
  for (int i = 0; i < 4; ++i) preds.push_back({rng.box(0, 64, 2, 20), rng.uniform(), 0, "a"});
  for (int i = 0; i < 3; ++i) gts.push_back({rng.box(0, 64, 2, 20), 0, "a", Scene::unspecified});
  CostOptions options;
  options.weights = {1.5, 3.0, 0.5};
  const CostComponents parts = cost_components(preds, gts, image, options);
  const Eigen::MatrixXd c = cost_matrix(preds, gts, image, options);
  REQUIRE(c.rows() == 4);
  REQUIRE(c.cols() == 3);
  CHECK((c - (1.5 * parts.cls + 3.0 * parts.l1 + 0.5 * parts.iou)).cwiseAbs().maxCoeff() < 1e-12);
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 3; ++j) {
      CHECK(parts.cls(i, j) == focal_cls_cost(preds[std::size_t(i)].score));
      CHECK(parts.l1(i, j) == l1_box_cost(preds[std::size_t(i)].box, gts[std::size_t(j)].box, image));
      CHECK(parts.iou(i, j) == 1.0 - rotated_iou(preds[std::size_t(i)].box, gts[std::size_t(j)].box));
    }
  }
}

TEST_CASE("default weights") {
  const MatchWeights w;
  CHECK(w.lambda_cls == 2.0);
  CHECK(w.lambda_l1 == 5.0);
  CHECK(w.lambda_iou == 2.0);
  const FocalParams f;
  CHECK(f.alpha == 0.25);
  CHECK(f.gamma == 2.0);
}

TEST_CASE("a perfect confident prediction leaves only the classification term") {
  const OrientedBoxd b = make_box(5.0, 5.0, 3.0, 2.0, 0.1);
  const std::vector<Detection> preds{{b, 1.0, 0, "a"}};
  const std::vector<GroundTruthRecord> gts{{b, 0, "a", Scene::unspecified}};
  const CostComponents parts = cost_components(preds, gts, {10, 10});
  CHECK(parts.l1(0, 0) == 0.0);
  CHECK(parts.iou(0, 0) == 0.0);
  CHECK(cost_matrix(preds, gts, {10, 10})(0, 0) == 2.0 * focal_cls_cost(1.0));
}

TEST_CASE("hungarian small cases") {
  Eigen::MatrixXd c(3, 3);
  c << 4, 1, 3, 2, 0, 5, 3, 2, 2;
  const MatchResult r = hungarian(c);
  REQUIRE(r.pairs.size() == 3);
  CHECK(r.total_cost == 5.0);
  CHECK(r.pairs[0] == std::pair{0, 1});
  CHECK(r.pairs[1] == std::pair{1, 0});
  CHECK(r.pairs[2] == std::pair{2, 2});
  CHECK(hungarian(Eigen::MatrixXd(0, 3)).pairs.empty());
  CHECK(hungarian(Eigen::MatrixXd(2, 0)).total_cost == 0.0);
}

TEST_CASE("hungarian rectangular inputs pick min(rows, cols) pairs") {
  Eigen::MatrixXd wide(2, 4);
  wide << 9, 1, 9, 9, 9, 9, 9, 2;
  const MatchResult w = hungarian(wide);
  REQUIRE(w.pairs.size() == 2);
  CHECK(w.pairs[0] == std::pair{0, 1});
  CHECK(w.pairs[1] == std::pair{1, 3});
  const MatchResult t = hungarian(Eigen::MatrixXd(wide.transpose()));
  REQUIRE(t.pairs.size() == 2);
  CHECK(t.pairs[0] == std::pair{1, 0});
  CHECK(t.pairs[1] == std::pair{3, 1});
  CHECK(t.total_cost == 3.0);
}

TEST_CASE("hungarian ties resolve deterministically") {
  const Eigen::MatrixXd c = Eigen::MatrixXd::Ones(3, 3);
  const MatchResult r = hungarian(c);
  CHECK(r.total_cost == 3.0);
  const MatchResult again = hungarian(c);
  CHECK(r.pairs == again.pairs);
}

TEST_CASE("hungarian matches exhaustive search") {
  Rng rng(21);
  for (int trial = 0; trial < 200; ++trial) {
    const int rows = rng.uniform_int(1, 7);
    const int cols = rng.uniform_int(1, 7);
    Eigen::MatrixXd c = random_matrix(rng, rows, cols);
    if (trial % 3 == 0) c = c.array().round();  // many ties
    const MatchResult r = hungarian(c);
    CHECK(r.pairs.size() == std::size_t(std::min(rows, cols)));
    double sum = 0;
    std::vector<bool> row_used(static_cast<std::size_t>(rows)), col_used(static_cast<std::size_t>(cols));
    for (auto [i, j] : r.pairs) {
      CHECK_FALSE(row_used[std::size_t(i)]);
      CHECK_FALSE(col_used[std::size_t(j)]);
      row_used[std::size_t(i)] = col_used[std::size_t(j)] = true;
      sum += c(i, j);
    }
    CHECK(sum == r.total_cost);
    CHECK(r.total_cost == doctest::Approx(oracle::brute_force_assignment(c)).epsilon(1e-12));
  }
}

TEST_CASE("hungarian rejects non-finite costs") {
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(2, 2);
  c(1, 0) = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(hungarian(c), ValidationError);
}

TEST_CASE("match fills the breakdown") {
  const std::vector<GroundTruthRecord> gts{{make_box(10.0, 10.0, 4.0, 2.0, 0.0), 0, "a", Scene::unspecified},
                                           {make_box(40.0, 40.0, 4.0, 2.0, 0.5), 0, "a", Scene::unspecified}};
  const std::vector<Detection> preds{{make_box(40.5, 40.0, 4.0, 2.0, 0.5), 0.8, 0, "a"},
                                     {make_box(20.0, 30.0, 4.0, 2.0, 0.0), 0.1, 0, "a"},
                                     {make_box(10.0, 10.5, 4.0, 2.0, 0.0), 0.9, 0, "a"}};
  const ImageSize image{64, 64};
  const MatchResult r = match(preds, gts, image);
  REQUIRE(r.pairs.size() == 2);
  CHECK(r.pairs[0] == std::pair{0, 1});
  CHECK(r.pairs[1] == std::pair{2, 0});
  REQUIRE(r.breakdown.size() == 2);
  const Eigen::MatrixXd c = cost_matrix(preds, gts, image);
  CHECK(r.breakdown[0].total == doctest::Approx(c(0, 1)).epsilon(1e-14));
  CHECK(r.breakdown[1].iou == doctest::Approx(iou_box_cost(preds[2].box, gts[0].box)).epsilon(1e-14));
  CHECK(r.total_cost == doctest::Approx(c(0, 1) + c(2, 0)).epsilon(1e-14));
}

TEST_CASE("training_loss averages over objects") {
  const OrientedBoxd g = make_box(10.0, 10.0, 4.0, 2.0, 0.0);
  const OrientedBoxd p = make_box(11.0, 10.0, 4.0, 2.0, 0.0);
  const std::vector<MatchedSample> pairs{{0.7, p, g}, {1.0, g, g}};
  const ImageSize image{20, 20};
  const LossBreakdown l = training_loss(pairs, 4, image);
  CHECK(l.cls_loss == doctest::Approx((focal_loss(0.7) + focal_loss(1.0)) / 4).epsilon(1e-14));
  CHECK(l.l1_loss == doctest::Approx(1.0 / 20 / 4).epsilon(1e-14));
  CHECK(l.iou_loss == doctest::Approx((1.0 - 6.0 / 10.0) / 4).epsilon(1e-12));
  CHECK(l.total == doctest::Approx(2 * l.cls_loss + 5 * l.l1_loss + 2 * l.iou_loss).epsilon(1e-14));
  CHECK(l.total >= 0.0);
  CHECK_THROWS_AS(training_loss(pairs, 0, image), ValidationError);
  const LossBreakdown none = training_loss(std::vector<MatchedSample>{}, 3, image);
  CHECK(none.total == 0.0);
}

TEST_CASE("loss denominator counts objects across the batch") {
  // Two images with 3 and 1 objects: every component is divided by 4.
  const OrientedBoxd g = make_box(10.0, 10.0, 4.0, 2.0, 0.0);
  const OrientedBoxd p = make_box(12.0, 10.0, 4.0, 2.0, 0.0);
  const std::vector<MatchedSample> pairs{{0.5, p, g}, {0.5, p, g}, {0.5, p, g}, {0.5, p, g}};
  const LossBreakdown l = training_loss(pairs, 3 + 1, {20, 20});
  CHECK(l.cls_loss == doctest::Approx(focal_loss(0.5)).epsilon(1e-14));
  CHECK(l.l1_loss == doctest::Approx(2.0 / 20).epsilon(1e-14));
}
