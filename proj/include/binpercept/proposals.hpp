#pragma once

#include <vector>

#include "binpercept/geometry.hpp"
#include "binpercept/image.hpp"

namespace binpercept {

struct ProposalConfig {
  double max_pos_diff = 0.005;     // meters
  double max_normal_angle = 50.0;  // degrees
  double max_sat_diff = 10.0;      // 8-bit units
  double max_color_diff = 10.0;    // 8-bit units, max over RGB channels
  double min_area_frac = 10000.0 / (1920.0 * 1080.0);

  void validate() const;
};

inline constexpr int kBackgroundRegion = -1;

struct RegionLabeling {
  Grid<int> labels;  // region index or kBackgroundRegion
  int region_count = 0;
};

/// HSV saturation scaled to [0,255].
double saturation(const Rgb& c);

/// 4-connected labeling; neighbors join when position, normal angle,
/// saturation and color all stay within thresholds. Region ids follow the
/// first row-major occurrence of each region.
RegionLabeling connected_components(const ColorImage& rgb, const PointBuffer& points, const NormalMap& normals,
                                    const ProposalConfig& cfg);

/// Tight boxes of regions covering at least min_area_frac * image_area
/// pixels, largest region first.
std::vector<Detection> extract_boxes(const RegionLabeling& labeling, const ProposalConfig& cfg, double image_area);

}  // namespace binpercept
