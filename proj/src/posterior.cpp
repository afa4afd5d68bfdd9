#include "binpercept/posterior.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>

#include "binpercept/parallel.hpp"

namespace binpercept {

void CombineConfig::validate() const {
  if (!(prior_floor >= 0.0 && det_weight >= 0.0)) throw ConfigError("combine prior_floor and det_weight must be >= 0");
  if (prior_floor + det_weight > 1.0 + 1e-12) throw ConfigError("combine prior_floor + det_weight must not exceed 1");
  if (!(sigma_frac > 0.0)) throw ConfigError("combine sigma_frac must be positive");
}

RenderMode parse_render_mode(std::string_view name) {
  if (name == "gaussian") return RenderMode::kGaussian;
  if (name == "box") return RenderMode::kBox;
  throw ConfigError("unknown render mode '" + std::string(name) + "' (expected gaussian or box)");
}

DetectionAccumulation accumulate_detections(std::span<const Detection> dets, int width, int height,
                                            int num_classes, const CombineConfig& cfg, RenderMode mode) {
  cfg.validate();
  if (width <= 0 || height <= 0) throw InputError("detection map dimensions must be positive");
  if (num_classes < 1) throw InputError("detection map needs at least one class");

  // Canonical order so the floating-point sums do not depend on list order.
  std::vector<Detection> sorted(dets.begin(), dets.end());
  std::sort(sorted.begin(), sorted.end(), [](const Detection& a, const Detection& b) {
    return std::tie(a.class_id, a.box.x, a.box.y, a.box.w, a.box.h, a.confidence) <
           std::tie(b.class_id, b.box.x, b.box.y, b.box.w, b.box.h, b.confidence);
  });

  DetectionAccumulation acc(static_cast<std::size_t>(num_classes), Grid<double>(width, height, 0.0));
  for (const Detection& d : sorted) {
    if (d.class_id < 0 || d.class_id >= num_classes) {
      throw InputError("detection class " + std::to_string(d.class_id) + " outside [0, " +
                       std::to_string(num_classes) + ")");
    }
    if (!(d.box.w > 0.0 && d.box.h > 0.0)) throw InputError("detection box must have positive extent");
    Grid<double>& plane = acc[static_cast<std::size_t>(d.class_id)];
    if (mode == RenderMode::kBox) {
      const int x0 = std::max(0, static_cast<int>(std::floor(d.box.x)));
      const int y0 = std::max(0, static_cast<int>(std::floor(d.box.y)));
      const int x1 = std::min(width, static_cast<int>(std::ceil(d.box.x + d.box.w)));
      const int y1 = std::min(height, static_cast<int>(std::ceil(d.box.y + d.box.h)));
      for (int y = y0; y < y1; ++y) {
        for (int x = x0; x < x1; ++x) plane.at(x, y) += d.confidence;
      }
      continue;
    }
    const double mx = d.box.x + 0.5 * d.box.w;
    const double my = d.box.y + 0.5 * d.box.h;
    const double sx = cfg.sigma_frac * 0.5 * d.box.w;
    const double sy = cfg.sigma_frac * 0.5 * d.box.h;
    parallel_rows(height, [&](int y) {
      const double dy = (y + 0.5 - my) / sy;
      for (int x = 0; x < width; ++x) {
        const double dx = (x + 0.5 - mx) / sx;
        plane.at(x, y) += d.confidence * std::exp(-0.5 * (dx * dx + dy * dy));
      }
    });
  }
  return acc;
}

ProbabilityMap normalize_accumulation(const DetectionAccumulation& acc) {
  if (acc.empty()) throw InputError("empty detection accumulation");
  double peak = 0.0;
  for (const auto& plane : acc) {
    for (double v : plane.values()) peak = std::max(peak, v);
  }
  ProbabilityMap out(acc.front().width(), acc.front().height(), static_cast<int>(acc.size()));
  if (!(peak > 0.0)) return out;
  for (std::size_t k = 0; k < acc.size(); ++k) {
    FloatImage& dst = out.plane(static_cast<int>(k));
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = static_cast<float>(acc[k][i] / peak);
  }
  return out;
}

ProbabilityMap render_detection_map(std::span<const Detection> dets, int width, int height, int num_classes,
                                    const CombineConfig& cfg, RenderMode mode) {
  return normalize_accumulation(accumulate_detections(dets, width, height, num_classes, cfg, mode));
}

ProbabilityMap combine(const ProbabilityMap& p_seg, const ProbabilityMap& p_det, const CombineConfig& cfg) {
  cfg.validate();
  if (!p_seg.same_shape(p_det)) {
    throw InputError("combine: segmentation " + describe_shape(p_seg.width(), p_seg.height()) + "x" +
                     std::to_string(p_seg.num_classes()) + " vs detection " +
                     describe_shape(p_det.width(), p_det.height()) + "x" + std::to_string(p_det.num_classes()));
  }
  ProbabilityMap out(p_seg.width(), p_seg.height(), p_seg.num_classes());
  for (int k = 0; k < p_seg.num_classes(); ++k) {
    const FloatImage& seg = p_seg.plane(k);
    const FloatImage& det = p_det.plane(k);
    FloatImage& dst = out.plane(k);
    for (std::size_t i = 0; i < dst.size(); ++i) {
      dst[i] = static_cast<float>(double{seg[i]} * (cfg.prior_floor + cfg.det_weight * double{det[i]}));
    }
  }
  return out;
}

LabelMap argmax_labels(const ProbabilityMap& p, double min_prob) {
  if (p.num_classes() < 1) throw InputError("argmax needs at least one class");
  if (p.num_classes() > kIgnoreLabel) throw InputError("argmax supports at most 255 classes");
  LabelMap out(p.width(), p.height(), 0);
  for (std::size_t i = 0; i < out.size(); ++i) {
    int best = 0;
    float best_p = p.plane(0)[i];
    for (int k = 1; k < p.num_classes(); ++k) {
      if (p.plane(k)[i] > best_p) {
        best = k;
        best_p = p.plane(k)[i];
      }
    }
    out[i] = best_p < min_prob ? 0 : static_cast<std::uint8_t>(best);
  }
  return out;
}

}  // namespace binpercept
