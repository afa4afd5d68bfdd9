#pragma once

#include <span>
#include <string_view>
#include <vector>

#include "binpercept/image.hpp"

namespace binpercept {

struct CombineConfig {
  double prior_floor = 0.1;
  double det_weight = 0.9;
  double sigma_frac = 0.5;  // sigma = sigma_frac * half box extent

  void validate() const;
};

enum class RenderMode { kGaussian, kBox };
RenderMode parse_render_mode(std::string_view name);

/// Unnormalized per-class detection evidence.
using DetectionAccumulation = std::vector<Grid<double>>;

DetectionAccumulation accumulate_detections(std::span<const Detection> dets, int width, int height,
                                            int num_classes, const CombineConfig& cfg, RenderMode mode);

/// Divides every class plane by the global maximum; an all-zero input stays zero.
ProbabilityMap normalize_accumulation(const DetectionAccumulation& acc);

ProbabilityMap render_detection_map(std::span<const Detection> dets, int width, int height, int num_classes,
                                    const CombineConfig& cfg, RenderMode mode);

/// P_seg * (prior_floor + det_weight * P_det), elementwise.
ProbabilityMap combine(const ProbabilityMap& p_seg, const ProbabilityMap& p_det, const CombineConfig& cfg);

/// Per-pixel most probable class, lowest index on ties; class 0 where the
/// maximum is below min_prob.
LabelMap argmax_labels(const ProbabilityMap& p, double min_prob);

}  // namespace binpercept
