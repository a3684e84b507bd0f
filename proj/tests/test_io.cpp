#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <sstream>

#include "obbkit/io.hpp"
#include "obbkit/synth.hpp"

using namespace obbkit;

namespace {

template <typename Fn>
std::string error_of(Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("parse_ground_truth with defaults and blank lines") {
  std::istringstream in(R"({"image_id":"a","cx":1,"cy":2,"w":3,"h":4,"theta":0.5,"class_id":2,"scene":"inshore"}

{"image_id":"b","cx":1.5,"cy":2,"w":3,"h":4,"theta":3.14159}
)");
  const auto gts = parse_ground_truth(in);
  REQUIRE(gts.size() == 2);
  CHECK(gts[0].image_id == "a");
  CHECK(gts[0].class_id == 2);
  CHECK(gts[0].scene == Scene::inshore);
  CHECK(gts[0].box.theta == 0.5);
  CHECK(gts[1].class_id == 0);
  CHECK(gts[1].scene == Scene::unspecified);
  CHECK(gts[1].box.theta == doctest::Approx(3.14159 - 3.141592653589793));
}

TEST_CASE("parse errors carry the physical line number") {
  std::istringstream bad_json("{\"image_id\":\"a\",\"cx\":1,\"cy\":2,\"w\":3,\"h\":4,\"theta\":0}\n\n{oops\n");
  try {
    parse_ground_truth(bad_json);
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
    CHECK(std::string(e.what()).rfind("line 3: ", 0) == 0);
  }
  std::istringstream missing(R"({"image_id":"a","cx":1,"cy":2,"w":3,"theta":0})");
  CHECK(error_of([&] { parse_ground_truth(missing); }).find("'h'") != std::string::npos);
  std::istringstream not_number(R"({"image_id":"a","cx":"1","cy":2,"w":3,"h":1,"theta":0})");
  CHECK_THROWS_AS(parse_ground_truth(not_number), ParseError);
  std::istringstream bad_scene(R"({"image_id":"a","cx":1,"cy":2,"w":3,"h":1,"theta":0,"scene":"lake"})");
  CHECK_THROWS_AS(parse_ground_truth(bad_scene), ValidationError);
  std::istringstream bad_class(R"({"image_id":"a","cx":1,"cy":2,"w":3,"h":1,"theta":0,"class_id":-1})");
  CHECK_THROWS_AS(parse_ground_truth(bad_class), ParseError);
  std::istringstream array_line("[1,2,3]\n");
  CHECK_THROWS_AS(parse_boxes(array_line), ParseError);
}

TEST_CASE("invariant violations are validation errors with line numbers") {
  std::istringstream zero_w("\n{\"image_id\":\"a\",\"cx\":1,\"cy\":2,\"w\":0,\"h\":4,\"theta\":0}\n");
  const std::string what = error_of([&] { parse_ground_truth(zero_w); });
  CHECK(what.rfind("line 2: ", 0) == 0);
  std::istringstream zero_w2("{\"image_id\":\"a\",\"cx\":1,\"cy\":2,\"w\":0,\"h\":4,\"theta\":0}\n");
  CHECK_THROWS_AS(parse_ground_truth(zero_w2), ValidationError);
  std::istringstream high_score(R"({"image_id":"a","cx":1,"cy":2,"w":1,"h":4,"theta":0,"score":1.5})");
  CHECK_THROWS_AS(parse_predictions(high_score), ValidationError);
  std::istringstream no_score(R"({"image_id":"a","cx":1,"cy":2,"w":1,"h":4,"theta":0})");
  CHECK_THROWS_AS(parse_predictions(no_score), ParseError);
}

TEST_CASE("ground truth and predictions round-trip exactly") {
  SynthOptions options;
  options.seed = 77;
  const SynthDataset data = synth_dataset(options);
  std::stringstream gt_text, pred_text;
  write_ground_truth(gt_text, data.ground_truth);
  write_predictions(pred_text, data.predictions);
  const auto gts = parse_ground_truth(gt_text);
  const auto preds = parse_predictions(pred_text);
  REQUIRE(gts.size() == data.ground_truth.size());
  REQUIRE(preds.size() == data.predictions.size());
  for (std::size_t i = 0; i < gts.size(); ++i) {
    CHECK(gts[i].box == data.ground_truth[i].box);
    CHECK(gts[i].image_id == data.ground_truth[i].image_id);
    CHECK(gts[i].scene == data.ground_truth[i].scene);
  }
  for (std::size_t i = 0; i < preds.size(); ++i) {
    CHECK(preds[i].box == data.predictions[i].box);
    CHECK(preds[i].score == data.predictions[i].score);
  }
}

TEST_CASE("parse_boxes ignores extra fields") {
  std::istringstream in(R"({"cx":1,"cy":2,"w":3,"h":4,"theta":0.1,"note":"x"})");
  const auto boxes = parse_boxes(in);
  REQUIRE(boxes.size() == 1);
  CHECK(boxes[0] == make_box(1.0, 2.0, 3.0, 4.0, 0.1));
}

TEST_CASE("format_number is shortest round-trip") {
  CHECK(format_number(0.5) == "0.5");
  CHECK(format_number(1.0) == "1");
  CHECK(std::stod(format_number(0.1 + 0.2)) == 0.1 + 0.2);
}

TEST_CASE("WeightStore") {
  WeightStore store;
  store.insert("a.weight", {{2, 3}, {1, 2, 3, 4, 5, 6}});
  store.insert("a.bias", {{3}, {0.5, -1, 2}});
  CHECK(store.size() == 2);
  CHECK(store.contains("a.bias"));
  CHECK(store.at("a.weight").element_count() == 6);
  CHECK(error_of([&] { store.at("b"); }).find("'b'") != std::string::npos);
  const std::vector<std::string> wanted{"a.bias", "x", "y"};
  const std::string what = error_of([&] { store.require(wanted); });
  CHECK(what.find("x") != std::string::npos);
  CHECK(what.find("y") != std::string::npos);
  CHECK_THROWS_AS(store.insert("bad", {{2, 2}, {1, 2, 3}}), ValidationError);
  CHECK_THROWS_AS(store.insert("neg", {{-1}, {}}), ValidationError);
  CHECK_THROWS_AS(store.insert("nan", {{1}, {std::nan("")}}), ValidationError);

  std::stringstream text;
  save_weights(text, store);
  CHECK(load_weights(text) == store);
}

TEST_CASE("load_weights rejects malformed documents") {
  std::istringstream not_json("{");
  CHECK_THROWS_AS(load_weights(not_json), ParseError);
  std::istringstream no_shape(R"({"a": {"data": [1]}})");
  CHECK_THROWS_AS(load_weights(no_shape), ParseError);
  std::istringstream mismatch(R"({"a": {"shape": [2], "data": [1]}})");
  CHECK_THROWS_AS(load_weights(mismatch), ValidationError);
}

TEST_CASE("pyramids round-trip") {
  Rng rng(5);
  PyramidRecord record{"img7", 64, 48, random_pyramid(rng, 64, 48, 3, 3)};
  std::stringstream text;
  write_pyramid(text, record);
  write_pyramid(text, record);
  const auto back = parse_pyramids(text);
  REQUIRE(back.size() == 2);
  CHECK(back[0].image_id == "img7");
  CHECK(back[0].image_width == 64);
  CHECK(back[0].image_height == 48);
  REQUIRE(back[0].pyramid.num_levels() == 3);
  for (int l = 0; l < 3; ++l) {
    const auto& a = record.pyramid.level(l);
    const auto& b = back[1].pyramid.level(l);
    CHECK(a.stride() == b.stride());
    CHECK(a.height() == b.height());
    CHECK(a.width() == b.width());
    CHECK(a.data() == b.data());
  }
  CHECK(back[0].pyramid.level(0).height() == 12);
  CHECK(back[0].pyramid.level(0).width() == 16);
}

TEST_CASE("parse_pyramids reports bad levels with the line") {
  std::istringstream bad(
      "\n{\"image_id\":\"a\",\"image_width\":8,\"image_height\":8,\"levels\":[{\"stride\":4,\"shape\":[1,2,2],"
      "\"data\":[1,2,3]}]}\n");
  const std::string what = error_of([&] { parse_pyramids(bad); });
  CHECK(what.rfind("line 2: ", 0) == 0);
  std::istringstream wrong_stride(
      "{\"image_id\":\"a\",\"image_width\":8,\"image_height\":8,\"levels\":[{\"stride\":8,\"shape\":[1,1,1],"
      "\"data\":[1]}]}\n");
  CHECK_THROWS_AS(parse_pyramids(wrong_stride), ValidationError);
}
