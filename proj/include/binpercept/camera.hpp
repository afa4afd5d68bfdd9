#pragma once

#include <Eigen/Geometry>

namespace binpercept {

/// Pinhole intrinsics plus the rigid sensor-to-reference transform.
struct CameraModel {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 0;
  int height = 0;
  Eigen::Isometry3d pose = Eigen::Isometry3d::Identity();

  /// Throws InputError unless fx, fy > 0, dims > 0 and the pose rotation is
  /// orthonormal with determinant +1 (to 1e-6).
  void validate() const;

  /// Viewing ray through pixel (u, v) scaled so that its z component is 1.
  Eigen::Vector3d ray(double u, double v) const {
    return {(u - cx) / fx, (v - cy) / fy, 1.0};
  }
};

}  // namespace binpercept
