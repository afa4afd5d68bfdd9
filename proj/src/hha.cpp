#include "binpercept/hha.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "binpercept/parallel.hpp"

namespace binpercept {

void HhaConfig::validate() const {
  if (std::abs(gravity.norm() - 1.0) > 1e-6) throw ConfigError("hha gravity must be a unit vector");
  if (!(min_depth > 0.0 && min_depth < max_depth)) throw ConfigError("hha needs 0 < min_depth < max_depth");
  if (!(ground_percentile > 0.0 && ground_percentile < 0.5)) throw ConfigError("hha ground_percentile must be in (0, 0.5)");
  if (!(height_range > 0.0)) throw ConfigError("hha height_range must be positive");
}

namespace {

std::uint8_t to_byte(double unit) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(unit, 0.0, 1.0) * 255.0));
}

}  // namespace

ColorImage encode_hha(const DepthMap& depth, const CameraModel& cam, const NormalMap& normals, const HhaConfig& cfg) {
  cfg.validate();
  if (normals.width() != depth.width() || normals.height() != depth.height()) {
    throw InputError("hha: normal map and depth differ in size");
  }
  const PointBuffer pts = back_project(depth, cam);
  const Eigen::Vector3d up = -cfg.gravity;

  std::vector<double> heights;
  heights.reserve(depth.size());
  for (std::size_t i = 0; i < depth.size(); ++i) {
    if (pts.valid[i]) heights.push_back(pts.points[i].dot(up));
  }
  if (heights.empty()) throw InputError("hha: depth map has no valid pixels");
  const auto rank = static_cast<std::size_t>(std::floor(cfg.ground_percentile * static_cast<double>(heights.size() - 1)));
  std::nth_element(heights.begin(), heights.begin() + static_cast<std::ptrdiff_t>(rank), heights.end());
  const double ground = heights[rank];

  const double inv_far = 1.0 / cfg.max_depth;
  const double inv_near = 1.0 / cfg.min_depth;
  ColorImage out(depth.width(), depth.height(), Rgb{0, 0, 0});
  parallel_rows(depth.height(), [&](int y) {
    for (int x = 0; x < depth.width(); ++x) {
      if (!depth.valid(x, y)) continue;
      const std::size_t i = out.index(x, y);
      Rgb& px = out[i];
      px[0] = to_byte((1.0 / depth[i] - inv_far) / (inv_near - inv_far));
      px[1] = to_byte((pts.points[i].dot(up) - ground) / cfg.height_range);
      if (normals.valid[i]) {
        const double c = std::clamp(normals.normals[i].dot(up), -1.0, 1.0);
        px[2] = to_byte(std::acos(c) / std::numbers::pi);
      }
    }
  });
  return out;
}

ColorImage encode_raw3(const DepthMap& depth, const HhaConfig& cfg) {
  cfg.validate();
  ColorImage out(depth.width(), depth.height(), Rgb{0, 0, 0});
  for (std::size_t i = 0; i < depth.size(); ++i) {
    if (!depth.valid(i)) continue;
    const std::uint8_t v = to_byte((depth[i] - cfg.min_depth) / (cfg.max_depth - cfg.min_depth));
    out[i] = {v, v, v};
  }
  return out;
}

}  // namespace binpercept
