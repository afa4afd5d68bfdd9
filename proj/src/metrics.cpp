#include "binpercept/metrics.hpp"

#include <algorithm>
#include <numeric>
#include <tuple>

namespace binpercept {

double intersection_area(const Box& a, const Box& b) {
  const double ix = std::min(a.x + a.w, b.x + b.w) - std::max(a.x, b.x);
  const double iy = std::min(a.y + a.h, b.y + b.h) - std::max(a.y, b.y);
  return ix > 0.0 && iy > 0.0 ? ix * iy : 0.0;
}

double iou(const Box& a, const Box& b) {
  const double inter = intersection_area(a, b);
  const double uni = a.area() + b.area() - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

void GroundTruthScene::validate() const {
  for (const auto& b : boxes) {
    if (!candidate_classes.contains(b.class_id)) {
      throw InputError("scene '" + id + "': box class " + std::to_string(b.class_id) + " missing from candidate classes");
    }
    if (!(b.box.w > 0.0 && b.box.h > 0.0)) throw InputError("scene '" + id + "': ground truth box with empty extent");
  }
}

LocationScore location_f1(std::span<const Detection> dets, const GroundTruthScene& gt, int class_id) {
  const GroundTruthBox* closest = nullptr;
  const bool present = std::any_of(gt.boxes.begin(), gt.boxes.end(), [&](const auto& g) { return g.class_id == class_id; });
  if (!present) {
    throw ClassAbsentError("class " + std::to_string(class_id) + " has no ground truth box in scene '" + gt.id + "'");
  }

  const Detection* best = nullptr;
  for (const auto& d : dets) {
    if (d.class_id == class_id && (best == nullptr || d.confidence > best->confidence)) best = &d;
  }
  if (best == nullptr) return {};

  double best_iou = -1.0;
  for (const auto& g : gt.boxes) {
    if (g.class_id != class_id) continue;
    const double v = iou(best->box, g.box);
    if (v > best_iou) {
      best_iou = v;
      closest = &g;
    }
  }

  LocationScore s;
  s.precision = best_iou;
  s.recall = intersection_area(best->box, closest->box) / closest->box.area();
  const double sum = s.precision + s.recall;
  s.f1 = sum > 0.0 ? 2.0 * s.precision * s.recall / sum : 0.0;
  return s;
}

double average_precision(const std::vector<bool>& ranked_is_tp, std::size_t num_ground_truth) {
  if (num_ground_truth == 0) throw InputError("average precision needs at least one ground truth instance");
  const std::size_t n = ranked_is_tp.size();
  std::vector<double> precision(n);
  std::vector<double> recall(n);
  std::size_t tp = 0;
  for (std::size_t i = 0; i < n; ++i) {
    tp += ranked_is_tp[i] ? 1 : 0;
    precision[i] = static_cast<double>(tp) / static_cast<double>(i + 1);
    recall[i] = static_cast<double>(tp) / static_cast<double>(num_ground_truth);
  }
  for (std::size_t i = n; i-- > 1;) precision[i - 1] = std::max(precision[i - 1], precision[i]);

  double ap = 0.0;
  double prev_recall = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    ap += (recall[i] - prev_recall) * precision[i];
    prev_recall = recall[i];
  }
  return ap;
}

MapResult mean_average_precision(std::span<const std::vector<Detection>> dets, std::span<const GroundTruthScene> gts,
                                 double iou_thresh, bool informed) {
  if (dets.size() != gts.size()) {
    throw InputError("mAP: " + std::to_string(dets.size()) + " detection lists for " + std::to_string(gts.size()) +
                     " scenes");
  }
  std::map<int, std::size_t> gt_counts;
  for (const auto& scene : gts) {
    for (const auto& b : scene.boxes) ++gt_counts[b.class_id];
  }
  if (gt_counts.empty()) throw InputError("mAP: no ground truth boxes in any scene");

  struct Ranked {
    double confidence;
    std::size_t scene;
    std::size_t index;
  };

  MapResult result;
  for (const auto& [cls, num_gt] : gt_counts) {
    std::vector<Ranked> ranked;
    for (std::size_t s = 0; s < dets.size(); ++s) {
      if (informed && !gts[s].candidate_classes.contains(cls)) continue;
      for (std::size_t i = 0; i < dets[s].size(); ++i) {
        if (dets[s][i].class_id == cls) ranked.push_back({dets[s][i].confidence, s, i});
      }
    }
    std::sort(ranked.begin(), ranked.end(), [](const Ranked& a, const Ranked& b) {
      if (a.confidence != b.confidence) return a.confidence > b.confidence;
      return std::tie(a.scene, a.index) < std::tie(b.scene, b.index);
    });

    std::vector<std::vector<bool>> matched(gts.size());
    for (std::size_t s = 0; s < gts.size(); ++s) matched[s].assign(gts[s].boxes.size(), false);

    std::vector<bool> is_tp;
    is_tp.reserve(ranked.size());
    for (const Ranked& r : ranked) {
      const Box& box = dets[r.scene][r.index].box;
      const auto& boxes = gts[r.scene].boxes;
      double best = -1.0;
      std::size_t best_j = boxes.size();
      for (std::size_t j = 0; j < boxes.size(); ++j) {
        if (boxes[j].class_id != cls || matched[r.scene][j]) continue;
        const double v = iou(box, boxes[j].box);
        if (v > best) {
          best = v;
          best_j = j;
        }
      }
      const bool tp = best_j < boxes.size() && best >= iou_thresh;
      if (tp) matched[r.scene][best_j] = true;
      is_tp.push_back(tp);
    }
    result.per_class_ap[cls] = average_precision(is_tp, num_gt);
  }
  double sum = 0.0;
  for (const auto& [cls, ap] : result.per_class_ap) sum += ap;
  result.mean_ap = sum / static_cast<double>(result.per_class_ap.size());
  return result;
}

ConfusionMatrix::ConfusionMatrix(int num_classes) : num_classes_(num_classes) {
  if (num_classes < 1 || num_classes > kIgnoreLabel) throw InputError("confusion matrix needs 1..255 classes");
  counts_.assign(static_cast<std::size_t>(num_classes) * num_classes, 0);
  missed_.assign(static_cast<std::size_t>(num_classes), 0);
}

void ConfusionMatrix::accumulate(const LabelMap& pred, const LabelMap& gt) {
  if (!pred.same_shape(gt)) {
    throw InputError("prediction " + describe_shape(pred.width(), pred.height()) + " and ground truth " +
                     describe_shape(gt.width(), gt.height()) + " differ in size");
  }
  for (std::size_t i = 0; i < gt.size(); ++i) {
    const int g = gt[i];
    if (g == kIgnoreLabel) continue;
    if (g >= num_classes_) throw InputError("ground truth label " + std::to_string(g) + " exceeds class count");
    const int p = pred[i];
    if (p >= num_classes_) {
      ++missed_[static_cast<std::size_t>(g)];
    } else {
      ++counts_[static_cast<std::size_t>(g) * num_classes_ + p];
    }
  }
}

std::uint64_t ConfusionMatrix::count(int gt, int pred) const {
  return counts_.at(static_cast<std::size_t>(gt) * num_classes_ + pred);
}

std::uint64_t ConfusionMatrix::true_positives(int c) const { return count(c, c); }

std::uint64_t ConfusionMatrix::false_positives(int c) const {
  std::uint64_t n = 0;
  for (int g = 0; g < num_classes_; ++g) {
    if (g != c) n += count(g, c);
  }
  return n;
}

std::uint64_t ConfusionMatrix::false_negatives(int c) const {
  std::uint64_t n = missed_[static_cast<std::size_t>(c)];
  for (int p = 0; p < num_classes_; ++p) {
    if (p != c) n += count(c, p);
  }
  return n;
}

namespace {

double ratio(std::uint64_t num, std::uint64_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

PixelF1Result f1_from_confusion(const ConfusionMatrix& cm) {
  const auto n = static_cast<std::size_t>(cm.num_classes());
  PixelF1Result r;
  r.precision.resize(n);
  r.recall.resize(n);
  r.f1.resize(n);
  r.present.resize(n);
  double sum = 0.0;
  int present = 0;
  for (int c = 0; c < cm.num_classes(); ++c) {
    const auto tp = cm.true_positives(c);
    const auto fp = cm.false_positives(c);
    const auto fn = cm.false_negatives(c);
    const auto k = static_cast<std::size_t>(c);
    r.precision[k] = ratio(tp, tp + fp);
    r.recall[k] = ratio(tp, tp + fn);
    const double s = r.precision[k] + r.recall[k];
    r.f1[k] = s > 0.0 ? 2.0 * r.precision[k] * r.recall[k] / s : 0.0;
    r.present[k] = tp + fn > 0;
    if (r.present[k]) {
      sum += r.f1[k];
      ++present;
    }
  }
  r.mean_f1 = present > 0 ? sum / present : 0.0;
  return r;
}

PixelF1Result pixel_f1(const LabelMap& pred, const LabelMap& gt, int num_classes) {
  ConfusionMatrix cm(num_classes);
  cm.accumulate(pred, gt);
  return f1_from_confusion(cm);
}

double distillation_loss(const FeatureMapStack& psi, const FeatureMapStack& phi) {
  if (!psi.same_shape(phi)) throw InputError("distillation loss: feature stacks differ in shape");
  double sum = 0.0;
  const auto a = psi.values();
  const auto b = phi.values();
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = double{a[i]} - double{b[i]};
    sum += d * d;
  }
  return sum;
}

}  // namespace binpercept
