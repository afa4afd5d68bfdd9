#include <random>

#include <gtest/gtest.h>

#include "binpercept/metrics.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace binpercept;

namespace {

GroundTruthScene scene_with(std::vector<GroundTruthBox> boxes, std::set<int> candidates = {}) {
  GroundTruthScene s;
  s.id = "s";
  s.boxes = std::move(boxes);
  for (const auto& b : s.boxes) candidates.insert(b.class_id);
  s.candidate_classes = std::move(candidates);
  return s;
}

double map_of(const std::vector<Detection>& dets, const GroundTruthScene& gt, bool informed) {
  const std::vector<std::vector<Detection>> d{dets};
  const std::vector<GroundTruthScene> g{gt};
  return mean_average_precision(d, g, 0.5, informed).mean_ap;
}

}  // namespace

TEST(Iou, BasicCases) {
  const Box a{0, 0, 10, 4};
  EXPECT_EQ(iou(a, a), 1.0);
  EXPECT_EQ(iou(a, Box{20, 20, 3, 3}), 0.0);
  EXPECT_EQ(iou(a, Box{0, 0, 5, 4}), 0.5);
  EXPECT_EQ(iou(a, Box{10, 0, 5, 4}), 0.0);  // touching edges do not overlap
}

TEST(LocationF1, IdenticalDisjointAndHalf) {
  const Box g{2, 2, 8, 6};
  const GroundTruthScene gt = scene_with({{1, g}});
  const std::vector<Detection> same{{1, 0.9, g}};
  const LocationScore s = location_f1(same, gt, 1);
  EXPECT_EQ(s.precision, 1.0);
  EXPECT_EQ(s.recall, 1.0);
  EXPECT_EQ(s.f1, 1.0);

  const std::vector<Detection> far{{1, 0.9, Box{30, 30, 4, 4}}};
  const LocationScore z = location_f1(far, gt, 1);
  EXPECT_EQ(z.precision, 0.0);
  EXPECT_EQ(z.recall, 0.0);
  EXPECT_EQ(z.f1, 0.0);

  const std::vector<Detection> half{{1, 0.9, Box{2, 2, 4, 6}}};
  const LocationScore h = location_f1(half, gt, 1);
  EXPECT_DOUBLE_EQ(h.precision, 0.5);
  EXPECT_DOUBLE_EQ(h.recall, 0.5);
  EXPECT_DOUBLE_EQ(h.f1, 0.5);
}

TEST(LocationF1, UsesMostConfidentDetection) {
  const GroundTruthScene gt = scene_with({{1, Box{0, 0, 10, 10}}});
  const std::vector<Detection> dets{{1, 0.2, Box{0, 0, 10, 10}}, {1, 0.8, Box{0, 0, 5, 10}}, {2, 1.0, Box{0, 0, 10, 10}}};
  EXPECT_DOUBLE_EQ(location_f1(dets, gt, 1).recall, 0.5);
}

TEST(LocationF1, AbsentClassIsReported) {
  const GroundTruthScene gt = scene_with({{1, Box{0, 0, 10, 10}}});
  EXPECT_THROW(location_f1(std::vector<Detection>{}, gt, 3), ClassAbsentError);
  EXPECT_EQ(location_f1(std::vector<Detection>{}, gt, 1).f1, 0.0);
}

TEST(LocationF1, MatchesRasterOracle) {
  std::mt19937_64 rng(31);
  auto random_box = [&] {
    return Box{double(rng() % 30), double(rng() % 30), double(1 + rng() % 20), double(1 + rng() % 20)};
  };
  for (int trial = 0; trial < 200; ++trial) {
    const Box g = random_box();
    const Box d = random_box();
    const LocationScore got = location_f1(std::vector<Detection>{{0, 1.0, d}}, scene_with({{0, g}}), 0);
    const auto want = oracle::raster_location_f1(d, g);
    EXPECT_NEAR(got.precision, want.precision, 1e-9);
    EXPECT_NEAR(got.recall, want.recall, 1e-9);
    EXPECT_NEAR(got.f1, want.f1, 1e-9);
  }
}

TEST(AveragePrecision, SingleTruePositive) {
  const GroundTruthScene gt = scene_with({{1, Box{0, 0, 10, 10}}});
  EXPECT_EQ(map_of({{1, 0.5, Box{0, 0, 10, 6}}}, gt, false), 1.0);
}

TEST(AveragePrecision, FalsePositiveRankedFirstHalvesAp) {
  const GroundTruthScene gt = scene_with({{1, Box{0, 0, 10, 10}}});
  const std::vector<Detection> dets{{1, 0.9, Box{50, 50, 10, 10}}, {1, 0.4, Box{0, 0, 10, 10}}};
  EXPECT_EQ(map_of(dets, gt, false), 0.5);
}

TEST(AveragePrecision, InterpolatedFromTheRight) {
  // TP, FP, TP with 2 ground truths: precision 1, 1/2, 2/3 -> envelope 1, 2/3.
  EXPECT_DOUBLE_EQ(average_precision({true, false, true}, 2), 0.5 * 1.0 + 0.5 * (2.0 / 3.0));
  EXPECT_EQ(average_precision({}, 3), 0.0);
  EXPECT_THROW(average_precision({true}, 0), InputError);
}

TEST(AveragePrecision, DuplicateDetectionIsFalsePositive) {
  const GroundTruthScene gt = scene_with({{1, Box{0, 0, 10, 10}}});
  const std::vector<Detection> dets{{1, 0.9, Box{0, 0, 10, 10}}, {1, 0.8, Box{0, 0, 10, 10}}};
  EXPECT_EQ(map_of(dets, gt, false), 1.0);  // the extra FP comes after full recall
  const std::vector<Detection> before{{1, 0.9, Box{0, 0, 10, 10}}, {1, 0.95, Box{0, 0, 10, 10}}};
  EXPECT_EQ(map_of(before, gt, false), 1.0);
}

TEST(AveragePrecision, InformedDropsAbsentClasses) {
  // Scene a does not contain class 2, so its class-2 detection is a false
  // positive unless informed filtering removes it.
  const GroundTruthScene a = scene_with({{1, Box{0, 0, 10, 10}}});
  const GroundTruthScene b = scene_with({{2, Box{0, 0, 10, 10}}});
  const std::vector<std::vector<Detection>> dets{{{1, 0.6, Box{0, 0, 10, 10}}, {2, 0.9, Box{0, 0, 10, 10}}},
                                                 {{2, 0.5, Box{0, 0, 10, 10}}}};
  const std::vector<GroundTruthScene> gts{a, b};
  const MapResult plain = mean_average_precision(dets, gts, 0.5, false);
  const MapResult informed = mean_average_precision(dets, gts, 0.5, true);
  EXPECT_EQ(plain.per_class_ap.at(2), 0.5);
  EXPECT_EQ(informed.per_class_ap.at(2), 1.0);
  EXPECT_GE(informed.mean_ap, plain.mean_ap);
}

TEST(AveragePrecision, OnlyClassesWithGroundTruthAreAveraged) {
  const GroundTruthScene gt = scene_with({{1, Box{0, 0, 10, 10}}});
  const std::vector<std::vector<Detection>> dets{{{1, 0.6, Box{0, 0, 10, 10}}, {7, 0.9, Box{0, 0, 10, 10}}}};
  const std::vector<GroundTruthScene> gts{gt};
  const MapResult r = mean_average_precision(dets, gts);
  EXPECT_EQ(r.per_class_ap.size(), 1u);
  EXPECT_EQ(r.mean_ap, 1.0);
}

TEST(PixelF1, PerfectPrediction) {
  LabelMap gt(4, 4, 0);
  gt.at(1, 1) = 2;
  const PixelF1Result r = pixel_f1(gt, gt, 3);
  EXPECT_EQ(r.f1[0], 1.0);
  EXPECT_EQ(r.f1[2], 1.0);
  EXPECT_FALSE(r.present[1]);
  EXPECT_EQ(r.mean_f1, 1.0);
}

TEST(PixelF1, BackgroundOnlyPrediction) {
  LabelMap gt(4, 4, 0);
  for (int y = 0; y < 2; ++y) {
    for (int x = 0; x < 4; ++x) gt.at(x, y) = 1;
  }
  const PixelF1Result r = pixel_f1(LabelMap(4, 4, 0), gt, 2);
  EXPECT_EQ(r.f1[1], 0.0);
  EXPECT_EQ(r.precision[0], 0.5);
  EXPECT_EQ(r.recall[0], 1.0);
  EXPECT_DOUBLE_EQ(r.f1[0], 2.0 / 3.0);
}

TEST(PixelF1, IgnorePixelsDoNotCount) {
  std::mt19937_64 rng(41);
  LabelMap gt(16, 16), pred(16, 16);
  for (std::size_t i = 0; i < gt.size(); ++i) {
    gt[i] = rng() % 7 == 0 ? kIgnoreLabel : static_cast<std::uint8_t>(rng() % 3);
    pred[i] = static_cast<std::uint8_t>(rng() % 3);
  }
  const PixelF1Result base = pixel_f1(pred, gt, 3);
  for (std::size_t i = 0; i < gt.size(); ++i) {
    if (gt[i] == kIgnoreLabel) pred[i] = static_cast<std::uint8_t>(rng() % 3);
  }
  const PixelF1Result flipped = pixel_f1(pred, gt, 3);
  EXPECT_EQ(base.f1, flipped.f1);
  EXPECT_EQ(base.mean_f1, flipped.mean_f1);
}

TEST(PixelF1, MatchesCountingOracle) {
  std::mt19937_64 rng(43);
  for (int trial = 0; trial < 30; ++trial) {
    const int classes = 1 + static_cast<int>(rng() % 6);
    LabelMap gt(24, 17), pred(24, 17);
    for (std::size_t i = 0; i < gt.size(); ++i) {
      gt[i] = rng() % 11 == 0 ? kIgnoreLabel : static_cast<std::uint8_t>(rng() % classes);
      pred[i] = static_cast<std::uint8_t>(rng() % classes);
    }
    const PixelF1Result got = pixel_f1(pred, gt, classes);
    const auto want = oracle::pixel_scores(pred, gt, classes);
    for (int c = 0; c < classes; ++c) {
      const auto k = static_cast<std::size_t>(c);
      EXPECT_EQ(got.present[k], want[k].present);
      EXPECT_NEAR(got.precision[k], want[k].precision, 1e-12);
      EXPECT_NEAR(got.recall[k], want[k].recall, 1e-12);
      EXPECT_NEAR(got.f1[k], want[k].f1, 1e-12);
    }
  }
}

TEST(PixelF1, OutOfRangePredictionIsAMiss) {
  LabelMap gt(2, 1, 1);
  LabelMap pred(2, 1, 1);
  pred.at(1, 0) = 9;
  const PixelF1Result r = pixel_f1(pred, gt, 2);
  EXPECT_EQ(r.recall[1], 0.5);
  EXPECT_EQ(r.precision[1], 1.0);
  EXPECT_THROW(pixel_f1(pred, LabelMap(2, 1, 5), 2), InputError);
}

TEST(DistillationLoss, Definition) {
  FeatureMapStack psi(3, 2, 4, 1.0f);
  FeatureMapStack phi(3, 2, 4, 0.0f);
  EXPECT_EQ(distillation_loss(psi, psi), 0.0);
  EXPECT_EQ(distillation_loss(psi, phi), 24.0);
  EXPECT_THROW(distillation_loss(psi, FeatureMapStack(3, 2, 5)), InputError);
}

TEST(DistillationLoss, MatchesScalarLoop) {
  std::mt19937_64 rng(47);
  FeatureMapStack psi(19, 11, 7), phi(19, 11, 7);
  for (auto& v : psi.values()) v = static_cast<float>(binpercept::testing::uniform(rng, -3, 3));
  for (auto& v : phi.values()) v = static_cast<float>(binpercept::testing::uniform(rng, -3, 3));
  const double want = oracle::feature_loss(psi, phi);
  EXPECT_NEAR(distillation_loss(psi, phi), want, 1e-6 * want);
}
