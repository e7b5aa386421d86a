#include <doctest.h>

#include <algorithm>
#include <random>

#include "omrkit/eval.hpp"

using namespace omrkit;

namespace {

Annotation gt(const std::string& name, BBox b) { return {name, b, {}, {}, {}}; }

Dataset one_page(std::vector<Annotation> gts, std::vector<std::string> registry) {
  Dataset d;
  d.class_registry = std::move(registry);
  d.pages.push_back({"p", 1000, 1000, std::nullopt, std::move(gts)});
  return d;
}

}  // namespace

TEST_CASE("iou") {
  const BBox a{0, 0, 2, 2};
  CHECK(iou(a, a) == 1.0);
  CHECK(iou(a, {5, 5, 6, 6}) == 0.0);
  CHECK(iou(a, {2, 0, 4, 2}) == 0.0);
  CHECK(iou(a, {1, 1, 3, 3}) == doctest::Approx(1.0 / 7.0).epsilon(1e-15));
  CHECK(iou({1, 1, 1, 1}, {1, 1, 1, 1}) == 0.0);
}

TEST_CASE("match_detections") {
  const std::vector<Annotation> gts{gt("a", {0, 0, 10, 10})};
  CHECK(match_detections({{"a", {0, 0, 10, 10}, 0.9}}, gts, 0.5)[0].true_positive);

  const auto two = match_detections({{"a", {0, 0, 10, 10}, 0.8}, {"a", {0, 0, 10, 10}, 0.9}}, gts, 0.5);
  CHECK_FALSE(two[0].true_positive);
  CHECK(two[1].true_positive);
  CHECK(two[1].gt_index == 0u);

  // IoU 0.4: [0,10] vs [0,4] on one axis.
  CHECK_FALSE(match_detections({{"a", {0, 0, 4, 10}, 0.9}}, gts, 0.5)[0].true_positive);
  // Same geometry, other class.
  CHECK_FALSE(match_detections({{"b", {0, 0, 10, 10}, 0.9}}, gts, 0.5)[0].true_positive);

  // Ties in score resolve by input order.
  const auto tied = match_detections({{"a", {0, 0, 10, 10}, 0.5}, {"a", {0, 0, 10, 10}, 0.5}}, gts, 0.5);
  CHECK(tied[0].true_positive);
  CHECK_FALSE(tied[1].true_positive);

  // A detection takes the highest-IoU unmatched GT.
  const std::vector<Annotation> pair{gt("a", {0, 0, 10, 10}), gt("a", {2, 0, 12, 10})};
  const auto best = match_detections({{"a", {2, 0, 12, 10}, 0.9}}, pair, 0.5);
  CHECK(best[0].gt_index == 1u);
}

TEST_CASE("evaluate: perfect and empty detections") {
  const auto d = one_page({gt("a", {0, 0, 10, 10}), gt("b", {20, 20, 30, 30})}, {"a", "b", "c"});
  std::vector<PageDetections> perfect{{"p", {{"a", {0, 0, 10, 10}, 0.9}, {"b", {20, 20, 30, 30}, 0.8}}}};
  const auto r = evaluate(perfect, d);
  CHECK(r.per_class.at("a").ap == 1.0);
  CHECK(r.per_class.at("b").ap == 1.0);
  CHECK(r.per_class.at("c").num_gt == 0);
  CHECK(r.map_macro == 1.0);

  const auto none = evaluate({}, d);
  CHECK(none.per_class.at("a").ap == 0.0);
  CHECK(none.map_macro == 0.0);
}

TEST_CASE("evaluate: hand-computed four-detection fixture") {
  // 3 GT; detections in score order TP, FP, TP, TP.
  // precision 1, 1/2, 2/3, 3/4 at recall 1/3, 1/3, 2/3, 1.
  // envelope at the recall steps: 1, 3/4, 3/4 -> AP = 1/3 + 1/4 + 1/4 = 5/6.
  const auto d = one_page({gt("a", {0, 0, 10, 10}), gt("a", {100, 0, 110, 10}), gt("a", {200, 0, 210, 10})}, {"a"});
  std::vector<PageDetections> dets{{"p",
                                    {{"a", {0, 0, 10, 10}, 0.9},
                                     {"a", {500, 500, 510, 510}, 0.8},
                                     {"a", {100, 0, 110, 10}, 0.7},
                                     {"a", {200, 0, 210, 10}, 0.6}}}};
  const auto r = evaluate(dets, d);
  CHECK(std::abs(r.per_class.at("a").ap - 5.0 / 6.0) < 1e-9);
  CHECK(r.per_class.at("a").tp == 3);
  CHECK(r.per_class.at("a").fp == 1);
  CHECK(average_precision({true, false, true, true}, 3) == doctest::Approx(5.0 / 6.0));
}

TEST_CASE("macro mAP exposes a missed minority class") {
  std::vector<Annotation> gts;
  std::vector<Detection> dets;
  for (int i = 0; i < 99; ++i) {
    const BBox b{i * 10.0, 0, i * 10.0 + 5, 5};
    gts.push_back(gt("major", b));
    dets.push_back({"major", b, 0.9});
  }
  gts.push_back(gt("minor", {0, 100, 5, 105}));
  const auto r = evaluate({{"p", dets}}, one_page(gts, {"major", "minor"}));
  CHECK(r.map_macro == doctest::Approx(0.5));
  CHECK(r.micro_recall() == doctest::Approx(0.99));
}

TEST_CASE("property: AP bounds, duplicates, order invariance") {
  std::mt19937_64 rng(42);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<Annotation> gts;
    const int n_gt = 1 + static_cast<int>(rng() % 8);
    for (int i = 0; i < n_gt; ++i) gts.push_back(gt("a", {i * 20.0, 0, i * 20.0 + 10, 10}));
    std::vector<Detection> dets;
    const int n_det = static_cast<int>(rng() % 10);
    for (int i = 0; i < n_det; ++i) {
      const double x = static_cast<double>(rng() % 180);
      dets.push_back({"a", {x, 0, x + 10, 10}, (static_cast<double>(rng() % 1000000) + 1) / 1e6 + i * 1e-9});
    }
    const auto d = one_page(gts, {"a"});
    const auto base = evaluate({{"p", dets}}, d);
    REQUIRE(base.map_macro >= 0.0);
    REQUIRE(base.map_macro <= 1.0);
    REQUIRE(base.per_class.at("a").tp <= std::min<std::size_t>(n_gt, dets.size()));

    auto shuffled = dets;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    REQUIRE(evaluate({{"p", shuffled}}, d).map_macro == doctest::Approx(base.map_macro).epsilon(1e-12));

    const auto flags = match_detections(dets, gts, 0.5);
    for (std::size_t i = 0; i < dets.size(); ++i) {
      if (!flags[i].true_positive) continue;
      auto dup = dets;
      Detection copy = dets[i];
      copy.score = dets[i].score * 0.5;
      dup.push_back(copy);
      REQUIRE(evaluate({{"p", dup}}, d).map_macro <= base.map_macro + 1e-12);
    }
  }
}

TEST_CASE("detections on unknown pages are false positives") {
  const auto d = one_page({gt("a", {0, 0, 10, 10})}, {"a"});
  const auto r = evaluate({{"elsewhere", {{"a", {0, 0, 10, 10}, 0.9}}}}, d);
  CHECK(r.per_class.at("a").fp == 1);
  CHECK(r.per_class.at("a").ap == 0.0);
}

TEST_CASE("result serialization is deterministic") {
  const auto d = one_page({gt("a", {0, 0, 10, 10})}, {"a"});
  const auto r = evaluate({{"p", {{"a", {0, 0, 10, 10}, 0.9}}}}, d);
  CHECK(eval_to_json(r) == eval_to_json(evaluate({{"p", {{"a", {0, 0, 10, 10}, 0.9}}}}, d)));
  CHECK(format_eval_table(r).find("mAP (macro): 1.0000") != std::string::npos);
}
