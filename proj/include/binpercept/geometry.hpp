#pragma once

#include <Eigen/Core>

#include "binpercept/camera.hpp"
#include "binpercept/image.hpp"

namespace binpercept {

/// Organized 3-D points in the camera frame, one per pixel.
struct PointBuffer {
  Grid<Eigen::Vector3d> points;
  Grid<std::uint8_t> valid;

  int width() const { return points.width(); }
  int height() const { return points.height(); }
};

/// Unit surface normals facing the camera; invalid where support is missing.
struct NormalMap {
  Grid<Eigen::Vector3d> normals;
  Grid<std::uint8_t> valid;

  int width() const { return normals.width(); }
  int height() const { return normals.height(); }
};

inline constexpr int kDefaultNormalWindow = 5;

PointBuffer back_project(const DepthMap& depth, const CameraModel& cam);

/// Forward-splats src into dst_cam's image with nearest-pixel rounding. When
/// several points land on one pixel the smallest depth is kept.
DepthMap reproject_depth(const DepthMap& src, const CameraModel& src_cam, const CameraModel& dst_cam);

/// Normals from central-difference tangents spanning `window` pixels.
NormalMap estimate_normals(const DepthMap& depth, const CameraModel& cam, int window = kDefaultNormalWindow);

}  // namespace binpercept
