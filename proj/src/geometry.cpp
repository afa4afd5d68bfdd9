#include "binpercept/geometry.hpp"

#include <cmath>
#include <limits>

#include "binpercept/parallel.hpp"

namespace binpercept {

void CameraModel::validate() const {
  if (!(fx > 0.0 && fy > 0.0)) throw InputError("camera focal lengths must be positive");
  if (width <= 0 || height <= 0) throw InputError("camera dimensions must be positive");
  const Eigen::Matrix3d r = pose.linear();
  const double ortho = (r.transpose() * r - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
  if (ortho > 1e-6 || std::abs(r.determinant() - 1.0) > 1e-6) {
    throw InputError("camera pose rotation is not orthonormal with determinant +1");
  }
}

namespace {

void require_dims(const DepthMap& depth, const CameraModel& cam) {
  if (depth.width() != cam.width || depth.height() != cam.height) {
    throw InputError("depth " + describe_shape(depth.width(), depth.height()) + " does not match camera " +
                     describe_shape(cam.width, cam.height));
  }
}

}  // namespace

PointBuffer back_project(const DepthMap& depth, const CameraModel& cam) {
  require_dims(depth, cam);
  PointBuffer out{Grid<Eigen::Vector3d>(depth.width(), depth.height(), Eigen::Vector3d::Zero()),
                  Grid<std::uint8_t>(depth.width(), depth.height(), 0)};
  parallel_rows(depth.height(), [&](int v) {
    for (int u = 0; u < depth.width(); ++u) {
      if (!depth.valid(u, v)) continue;
      out.points.at(u, v) = depth.at(u, v) * cam.ray(u, v);
      out.valid.at(u, v) = 1;
    }
  });
  return out;
}

DepthMap reproject_depth(const DepthMap& src, const CameraModel& src_cam, const CameraModel& dst_cam) {
  src_cam.validate();
  dst_cam.validate();
  require_dims(src, src_cam);

  // src sensor -> reference -> dst sensor
  const Eigen::Isometry3d to_dst = dst_cam.pose.inverse() * src_cam.pose;
  Grid<double> zbuf(dst_cam.width, dst_cam.height, std::numeric_limits<double>::infinity());

  for (int v = 0; v < src.height(); ++v) {
    for (int u = 0; u < src.width(); ++u) {
      if (!src.valid(u, v)) continue;
      const Eigen::Vector3d p = to_dst * (src.at(u, v) * src_cam.ray(u, v));
      if (!(p.z() > 0.0)) continue;
      const double px = dst_cam.fx * p.x() / p.z() + dst_cam.cx;
      const double py = dst_cam.fy * p.y() / p.z() + dst_cam.cy;
      const double tx = std::floor(px + 0.5);
      const double ty = std::floor(py + 0.5);
      if (tx < 0.0 || ty < 0.0 || tx >= dst_cam.width || ty >= dst_cam.height) continue;
      double& z = zbuf.at(static_cast<int>(tx), static_cast<int>(ty));
      z = std::min(z, p.z());
    }
  }

  DepthMap out(dst_cam.width, dst_cam.height);
  for (std::size_t i = 0; i < zbuf.size(); ++i) {
    if (std::isfinite(zbuf[i])) out.set(i, zbuf[i]);
  }
  return out;
}

NormalMap estimate_normals(const DepthMap& depth, const CameraModel& cam, int window) {
  if (window < 3 || window % 2 == 0) throw InputError("normal window must be odd and >= 3");
  const PointBuffer pts = back_project(depth, cam);
  const int w = depth.width();
  const int h = depth.height();
  const int r = window / 2;

  NormalMap out{Grid<Eigen::Vector3d>(w, h, Eigen::Vector3d::Zero()), Grid<std::uint8_t>(w, h, 0)};
  parallel_rows(h, [&](int v) {
    if (v - r < 0 || v + r >= h) return;
    for (int u = r; u + r < w; ++u) {
      if (!pts.valid.at(u, v) || !pts.valid.at(u - r, v) || !pts.valid.at(u + r, v) ||
          !pts.valid.at(u, v - r) || !pts.valid.at(u, v + r)) {
        continue;
      }
      const Eigen::Vector3d tx = pts.points.at(u + r, v) - pts.points.at(u - r, v);
      const Eigen::Vector3d ty = pts.points.at(u, v + r) - pts.points.at(u, v - r);
      Eigen::Vector3d n = tx.cross(ty);
      const double len = n.norm();
      if (!(len > 0.0) || !std::isfinite(len)) continue;
      n /= len;
      if (n.dot(pts.points.at(u, v)) > 0.0) n = -n;
      out.normals.at(u, v) = n;
      out.valid.at(u, v) = 1;
    }
  });
  return out;
}

}  // namespace binpercept
