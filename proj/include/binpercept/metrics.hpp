#pragma once

#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "binpercept/image.hpp"

namespace binpercept {

double intersection_area(const Box& a, const Box& b);
double iou(const Box& a, const Box& b);

struct GroundTruthBox {
  int class_id = 0;
  Box box;
};

struct GroundTruthScene {
  std::string id;
  std::vector<GroundTruthBox> boxes;
  LabelMap labels;
  std::set<int> candidate_classes;

  /// Throws InputError if a box class is missing from candidate_classes.
  void validate() const;
};

/// Raised when scoring a class that the scene does not contain.
class ClassAbsentError : public InputError {
 public:
  using InputError::InputError;
};

struct LocationScore {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

/// Scores the most confident detection of class_id against the same-class
/// ground truth box it overlaps most.
LocationScore location_f1(std::span<const Detection> dets, const GroundTruthScene& gt, int class_id);

struct MapResult {
  double mean_ap = 0.0;
  std::map<int, double> per_class_ap;  // classes with at least one ground truth box
};

/// All-point interpolated AP from ranked true/false positive flags.
double average_precision(const std::vector<bool>& ranked_is_tp, std::size_t num_ground_truth);

/// dets[i] holds the detections of gts[i]. In informed mode detections of
/// classes outside the scene's candidate set are dropped first.
MapResult mean_average_precision(std::span<const std::vector<Detection>> dets,
                                 std::span<const GroundTruthScene> gts, double iou_thresh = 0.5,
                                 bool informed = false);

/// Pixel confusion counts; rows are ground truth, columns predictions.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(int num_classes);

  /// Ignore-labelled ground truth pixels are skipped. Predictions outside the
  /// class range count as misses for the ground truth class.
  void accumulate(const LabelMap& pred, const LabelMap& gt);

  int num_classes() const { return num_classes_; }
  std::uint64_t count(int gt, int pred) const;
  std::uint64_t true_positives(int c) const;
  std::uint64_t false_positives(int c) const;
  std::uint64_t false_negatives(int c) const;

 private:
  int num_classes_;
  std::vector<std::uint64_t> counts_;
  std::vector<std::uint64_t> missed_;  // gt pixels with an out-of-range prediction
};

struct PixelF1Result {
  std::vector<double> precision;
  std::vector<double> recall;
  std::vector<double> f1;
  std::vector<bool> present;  // class occurs in ground truth
  double mean_f1 = 0.0;       // macro mean over present classes
};

PixelF1Result f1_from_confusion(const ConfusionMatrix& cm);
PixelF1Result pixel_f1(const LabelMap& pred, const LabelMap& gt, int num_classes);

/// Sum of squared elementwise differences.
double distillation_loss(const FeatureMapStack& psi, const FeatureMapStack& phi);

}  // namespace binpercept
