#include "binpercept/proposals.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

namespace binpercept {

void ProposalConfig::validate() const {
  if (!(max_pos_diff > 0.0 && max_normal_angle > 0.0 && max_sat_diff > 0.0 && max_color_diff > 0.0 &&
        min_area_frac > 0.0)) {
    throw ConfigError("proposal thresholds must all be positive");
  }
}

double saturation(const Rgb& c) {
  const int hi = std::max({c[0], c[1], c[2]});
  const int lo = std::min({c[0], c[1], c[2]});
  return hi == 0 ? 0.0 : 255.0 * static_cast<double>(hi - lo) / static_cast<double>(hi);
}

namespace {

class DisjointSets {
 public:
  explicit DisjointSets(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), std::size_t{0}); }

  std::size_t find(std::size_t i) {
    while (parent_[i] != i) {
      parent_[i] = parent_[parent_[i]];
      i = parent_[i];
    }
    return i;
  }

  // The smaller index becomes the root, so every root is its set's first pixel in scan order.
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (b < a) std::swap(a, b);
    parent_[b] = a;
  }

 private:
  std::vector<std::size_t> parent_;
};

}  // namespace

RegionLabeling connected_components(const ColorImage& rgb, const PointBuffer& points, const NormalMap& normals,
                                    const ProposalConfig& cfg) {
  cfg.validate();
  const int w = rgb.width();
  const int h = rgb.height();
  if (points.width() != w || points.height() != h || normals.width() != w || normals.height() != h) {
    throw InputError("connected_components: rgb, points and normals must share dimensions");
  }

  const double cos_limit = std::cos(cfg.max_normal_angle * std::numbers::pi / 180.0);
  const double pos_limit_sq = cfg.max_pos_diff * cfg.max_pos_diff;
  std::vector<double> sat(rgb.size());
  std::vector<std::uint8_t> usable(rgb.size());
  for (std::size_t i = 0; i < rgb.size(); ++i) {
    sat[i] = saturation(rgb[i]);
    usable[i] = points.valid[i] && normals.valid[i];
  }

  auto connected = [&](std::size_t a, std::size_t b) {
    if (!usable[a] || !usable[b]) return false;
    if ((points.points[a] - points.points[b]).squaredNorm() > pos_limit_sq) return false;
    if (normals.normals[a].dot(normals.normals[b]) < cos_limit) return false;
    if (std::abs(sat[a] - sat[b]) > cfg.max_sat_diff) return false;
    for (int c = 0; c < 3; ++c) {
      if (std::abs(int{rgb[a][c]} - int{rgb[b][c]}) > cfg.max_color_diff) return false;
    }
    return true;
  };

  DisjointSets sets(rgb.size());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t i = rgb.index(x, y);
      if (x + 1 < w && connected(i, i + 1)) sets.unite(i, i + 1);
      if (y + 1 < h && connected(i, i + static_cast<std::size_t>(w))) sets.unite(i, i + static_cast<std::size_t>(w));
    }
  }

  RegionLabeling out{Grid<int>(w, h, kBackgroundRegion), 0};
  std::vector<int> root_label(rgb.size(), kBackgroundRegion);
  for (std::size_t i = 0; i < rgb.size(); ++i) {
    if (!usable[i]) continue;
    const std::size_t root = sets.find(i);
    if (root_label[root] == kBackgroundRegion) root_label[root] = out.region_count++;
    out.labels[i] = root_label[root];
  }
  return out;
}

std::vector<Detection> extract_boxes(const RegionLabeling& labeling, const ProposalConfig& cfg, double image_area) {
  cfg.validate();
  struct Extent {
    std::size_t count = 0;
    int x0 = 0, y0 = 0, x1 = -1, y1 = -1;
  };
  std::vector<Extent> extents(static_cast<std::size_t>(labeling.region_count));
  const Grid<int>& labels = labeling.labels;
  for (int y = 0; y < labels.height(); ++y) {
    for (int x = 0; x < labels.width(); ++x) {
      const int r = labels.at(x, y);
      if (r == kBackgroundRegion) continue;
      if (r < 0 || r >= labeling.region_count) throw InputError("extract_boxes: region index out of range");
      Extent& e = extents[static_cast<std::size_t>(r)];
      if (e.count == 0) {
        e.x0 = e.x1 = x;
        e.y0 = e.y1 = y;
      } else {
        e.x0 = std::min(e.x0, x);
        e.x1 = std::max(e.x1, x);
        e.y0 = std::min(e.y0, y);
        e.y1 = std::max(e.y1, y);
      }
      ++e.count;
    }
  }

  // Tolerance keeps an exact threshold (e.g. 10000 px at 1920x1080) from being lost to rounding in frac * area.
  const double min_count = cfg.min_area_frac * image_area * (1.0 - 1e-12);
  std::vector<std::size_t> kept;
  for (std::size_t r = 0; r < extents.size(); ++r) {
    if (static_cast<double>(extents[r].count) >= min_count) kept.push_back(r);
  }
  std::stable_sort(kept.begin(), kept.end(),
                   [&](std::size_t a, std::size_t b) { return extents[a].count > extents[b].count; });

  std::vector<Detection> out;
  out.reserve(kept.size());
  for (std::size_t r : kept) {
    const Extent& e = extents[r];
    out.push_back({kUnsetClass, 1.0,
                   Box{static_cast<double>(e.x0), static_cast<double>(e.y0), static_cast<double>(e.x1 - e.x0 + 1),
                       static_cast<double>(e.y1 - e.y0 + 1)}});
  }
  return out;
}

}  // namespace binpercept
