#pragma once

#include <span>
#include <vector>

#include "binpercept/image.hpp"

namespace binpercept {

/// Source weights used for the shelf setup: two RGB-D sensors and one stereo stream.
inline constexpr double kAlphaRgbd = 40.0;
inline constexpr double kAlphaStereo = 0.1;

struct FusionConfig {
  std::vector<double> alphas;  // one per source, all > 0
  double max_spread = 0.05;    // meters; larger source disagreement invalidates the pixel

  void validate() const;
};

struct FusedDepth {
  DepthMap depth;
  WeightMap weight;
};

/// Per pixel over the valid sources: alpha-weighted mean depth and spread
/// weight exp(-(max - min)). Spread above max_spread, or no valid source,
/// yields an invalid pixel with weight 0.
FusedDepth fuse(std::span<const DepthMap> sources, const FusionConfig& cfg);

}  // namespace binpercept
