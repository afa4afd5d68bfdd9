#pragma once

#include <Eigen/Core>

#include "binpercept/camera.hpp"
#include "binpercept/geometry.hpp"
#include "binpercept/image.hpp"

namespace binpercept {

struct HhaConfig {
  // Camera frame has y pointing down the image, so "down" is +y.
  Eigen::Vector3d gravity{0.0, 1.0, 0.0};
  double min_depth = 0.2;
  double max_depth = 3.0;
  double ground_percentile = 0.01;
  double height_range = 2.5;  // meters mapped onto [0,255]

  void validate() const;
};

/// Three 8-bit channels: disparity, height above ground, angle between the
/// surface normal and the up direction.
ColorImage encode_hha(const DepthMap& depth, const CameraModel& cam, const NormalMap& normals,
                      const HhaConfig& cfg);

/// Depth mapped linearly from [min_depth, max_depth] to [0,255] and copied
/// to all three channels.
ColorImage encode_raw3(const DepthMap& depth, const HhaConfig& cfg);

}  // namespace binpercept
