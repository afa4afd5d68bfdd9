#include "binpercept/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <set>

#include "binpercept/geometry.hpp"
#include "binpercept/io.hpp"
#include "binpercept/metrics.hpp"

namespace binpercept {

SceneSpec SceneSpec::bundled() {
  SceneSpec s;
  s.shapes = {
      {1, Box{40, 60, 70, 80}, 0.90, Rgb{200, 40, 40}},
      {2, Box{140, 100, 60, 60}, 0.80, Rgb{40, 170, 60}},
      {3, Box{215, 40, 50, 110}, 1.00, Rgb{40, 60, 200}},
  };
  // Sensor 1 is mounted upside down, so columns 20..70 of its image land on
  // the right part of the wall in the reference view.
  s.band = {20, 70, 0.06, 0.15};
  return s;
}

void SceneSpec::validate() const {
  if (shapes.empty()) throw InputError("synthetic scene needs at least one shape");
  if (width <= 0 || height <= 0 || !(fx > 0.0) || !(fy > 0.0)) throw InputError("synthetic scene: bad camera");
  if (!(background_depth > 0.0)) throw InputError("synthetic scene: background depth must be positive");
  for (const auto& s : shapes) {
    if (s.class_id < 1 || s.class_id >= kIgnoreLabel) throw InputError("synthetic shape class must be in [1, 254]");
    if (!(s.rect.w > 0.0 && s.rect.h > 0.0)) throw InputError("synthetic shape rect must have positive extent");
    if (!(s.depth > 0.0)) throw InputError("synthetic shape depth must be positive");
  }
  if (band.x0 < 0 || band.x1 < band.x0 || band.x1 > width) throw InputError("synthetic corruption band out of range");
  if (!(band.min_offset >= 0.0 && band.max_offset >= band.min_offset)) throw InputError("synthetic band offsets invalid");
  if (!(sensor_noise >= 0.0 && stereo_noise >= 0.0)) throw InputError("synthetic noise must be >= 0");
  if (!(dropout >= 0.0 && dropout < 1.0 && stereo_dropout >= 0.0 && stereo_dropout < 1.0)) {
    throw InputError("synthetic dropout must be in [0, 1)");
  }
}

namespace {

void reject_unknown(const nlohmann::json& j, std::initializer_list<const char*> known, const std::string& where) {
  for (const auto& [key, value] : j.items()) {
    if (std::find_if(known.begin(), known.end(), [&](const char* k) { return key == k; }) == known.end()) {
      throw ConfigError("unknown key '" + key + "' in " + where);
    }
  }
}

Rgb rgb_from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 3) throw ConfigError("colors must be [r, g, b]");
  return {j[0].get<std::uint8_t>(), j[1].get<std::uint8_t>(), j[2].get<std::uint8_t>()};
}

}  // namespace

SceneSpec scene_spec_from_json(const nlohmann::json& j) {
  try {
    reject_unknown(j,
                   {"width", "height", "fx", "fy", "background_depth", "background_color", "shapes", "sensor_baseline",
                    "sensor_noise", "stereo_noise", "dropout", "stereo_dropout", "band"},
                   "scene spec");
    SceneSpec s = SceneSpec::bundled();
    s.width = j.value("width", s.width);
    s.height = j.value("height", s.height);
    s.fx = j.value("fx", s.fx);
    s.fy = j.value("fy", s.fy);
    s.background_depth = j.value("background_depth", s.background_depth);
    if (j.contains("background_color")) s.background_color = rgb_from_json(j.at("background_color"));
    s.sensor_baseline = j.value("sensor_baseline", s.sensor_baseline);
    s.sensor_noise = j.value("sensor_noise", s.sensor_noise);
    s.stereo_noise = j.value("stereo_noise", s.stereo_noise);
    s.dropout = j.value("dropout", s.dropout);
    s.stereo_dropout = j.value("stereo_dropout", s.stereo_dropout);
    if (j.contains("shapes")) {
      s.shapes.clear();
      for (const auto& sj : j.at("shapes")) {
        reject_unknown(sj, {"class_id", "rect", "depth", "color"}, "shape");
        SceneShape shape;
        shape.class_id = sj.at("class_id").get<int>();
        const auto& r = sj.at("rect");
        if (!r.is_array() || r.size() != 4) throw ConfigError("shape rect must be [x, y, w, h]");
        shape.rect = {r[0].get<double>(), r[1].get<double>(), r[2].get<double>(), r[3].get<double>()};
        shape.depth = sj.at("depth").get<double>();
        if (sj.contains("color")) shape.color = rgb_from_json(sj.at("color"));
        s.shapes.push_back(shape);
      }
    }
    if (j.contains("band")) {
      const auto& b = j.at("band");
      reject_unknown(b, {"x0", "x1", "min_offset", "max_offset"}, "band");
      s.band.x0 = b.value("x0", s.band.x0);
      s.band.x1 = b.value("x1", s.band.x1);
      s.band.min_offset = b.value("min_offset", s.band.min_offset);
      s.band.max_offset = b.value("max_offset", s.band.max_offset);
    }
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed scene spec: ") + e.what());
  }
}

namespace scene_files {
std::string depth_source(int i) { return "depth_" + std::to_string(i) + ".png"; }
std::string camera_source(int i) { return "camera_" + std::to_string(i) + ".json"; }
}  // namespace scene_files

namespace {

struct Hit {
  double depth = std::numeric_limits<double>::infinity();  // along the sensor's optical axis
  int shape = -1;                                          // -1 is the background wall
};

/// Shape rectangles expressed in the reference frame at their depth plane.
struct Slab {
  double z;
  double x0, x1, y0, y1;
};

class SceneGeometry {
 public:
  SceneGeometry(const SceneSpec& spec, const CameraModel& ref) : background_(spec.background_depth) {
    for (const auto& s : spec.shapes) {
      // Pixel u is inside the rect when rect.x <= u < rect.x + rect.w.
      slabs_.push_back({s.depth, (s.rect.x - 0.5 - ref.cx) / ref.fx * s.depth,
                        (s.rect.x + s.rect.w - 0.5 - ref.cx) / ref.fx * s.depth,
                        (s.rect.y - 0.5 - ref.cy) / ref.fy * s.depth,
                        (s.rect.y + s.rect.h - 0.5 - ref.cy) / ref.fy * s.depth});
    }
  }

  Hit cast(const CameraModel& cam, int u, int v) const {
    const Eigen::Vector3d origin = cam.pose.translation();
    const Eigen::Vector3d dir = cam.pose.linear() * cam.ray(u, v);
    Hit hit;
    if (dir.z() <= 0.0) return hit;
    hit.depth = (background_ - origin.z()) / dir.z();
    for (std::size_t k = 0; k < slabs_.size(); ++k) {
      const Slab& s = slabs_[k];
      const double t = (s.z - origin.z()) / dir.z();
      if (!(t > 0.0) || t >= hit.depth) continue;
      const Eigen::Vector3d p = origin + t * dir;
      if (p.x() >= s.x0 && p.x() < s.x1 && p.y() >= s.y0 && p.y() < s.y1) {
        hit.depth = t;
        hit.shape = static_cast<int>(k);
      }
    }
    return hit;
  }

 private:
  double background_;
  std::vector<Slab> slabs_;
};

CameraModel make_camera(const SceneSpec& spec) {
  CameraModel cam;
  cam.fx = spec.fx;
  cam.fy = spec.fy;
  cam.cx = (spec.width - 1) / 2.0;
  cam.cy = (spec.height - 1) / 2.0;
  cam.width = spec.width;
  cam.height = spec.height;
  return cam;
}

std::uint8_t jitter_channel(std::uint8_t base, int delta) {
  return static_cast<std::uint8_t>(std::clamp(int{base} + delta, 0, 254));
}

}  // namespace

SyntheticScene render_synthetic_scene(const SceneSpec& spec, std::uint64_t seed) {
  spec.validate();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> unit_noise(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  std::uniform_int_distribution<int> color_jitter(-2, 2);

  SyntheticScene scene;
  scene.reference = make_camera(spec);
  const SceneGeometry geometry(spec, scene.reference);
  const int w = spec.width;
  const int h = spec.height;

  CameraModel upper = scene.reference;
  CameraModel lower = scene.reference;
  lower.pose = Eigen::Isometry3d::Identity();
  lower.pose.rotate(Eigen::AngleAxisd(std::numbers::pi, Eigen::Vector3d::UnitZ()));
  lower.pose.translation() = Eigen::Vector3d(spec.sensor_baseline, 0.0, 0.0);
  CameraModel stereo = scene.reference;
  scene.sensor_cams = {upper, lower, stereo};

  int max_class = 0;
  for (const auto& s : spec.shapes) max_class = std::max(max_class, s.class_id);
  scene.num_classes = max_class + 1;

  scene.rgb = ColorImage(w, h);
  scene.gt_labels = LabelMap(w, h, 0);
  scene.gt_depth = DepthMap(w, h);
  for (int v = 0; v < h; ++v) {
    for (int u = 0; u < w; ++u) {
      const Hit hit = geometry.cast(scene.reference, u, v);
      scene.gt_depth.set(u, v, hit.depth);
      const Rgb base = hit.shape < 0 ? spec.background_color : spec.shapes[static_cast<std::size_t>(hit.shape)].color;
      scene.rgb.at(u, v) = {jitter_channel(base[0], color_jitter(rng)), jitter_channel(base[1], color_jitter(rng)),
                            jitter_channel(base[2], color_jitter(rng))};
      scene.gt_labels.at(u, v) =
          hit.shape < 0 ? 0 : static_cast<std::uint8_t>(spec.shapes[static_cast<std::size_t>(hit.shape)].class_id);
    }
  }

  auto render_sensor = [&](const CameraModel& cam, double sigma, double drop, bool corrupt) {
    DepthMap d(w, h);
    DepthMap band_truth(w, h);
    for (int v = 0; v < h; ++v) {
      for (int u = 0; u < w; ++u) {
        const Hit hit = geometry.cast(cam, u, v);
        const double noise = sigma * unit_noise(rng);
        const bool dropped = uniform(rng) < drop;
        if (!std::isfinite(hit.depth)) continue;
        double z = hit.depth + noise;
        if (corrupt && u >= spec.band.x0 && u < spec.band.x1) {
          const double phase = std::sin(std::numbers::pi * v / std::max(1, h - 1));
          z += spec.band.min_offset + (spec.band.max_offset - spec.band.min_offset) * phase;
          band_truth.set(u, v, hit.depth);
        }
        if (!dropped && z > 0.0) d.set(u, v, z);
      }
    }
    return std::pair{d, band_truth};
  };

  auto [d0, unused0] = render_sensor(upper, spec.sensor_noise, spec.dropout, false);
  auto [d1, band_truth] = render_sensor(lower, spec.sensor_noise, spec.dropout, true);
  auto [d2, unused2] = render_sensor(stereo, spec.stereo_noise, spec.stereo_dropout, false);
  scene.sensor_depths = {std::move(d0), std::move(d1), std::move(d2)};

  const DepthMap band_ref = reproject_depth(band_truth, lower, scene.reference);
  scene.band_mask = LabelMap(w, h, 0);
  for (std::size_t i = 0; i < band_ref.size(); ++i) scene.band_mask[i] = band_ref.valid(i) ? 255 : 0;
  return scene;
}

namespace {

GroundTruthScene ground_truth_boxes(const SceneSpec& spec, const SyntheticScene& scene) {
  GroundTruthScene gt;
  gt.id = "synthetic";
  const SceneGeometry geometry(spec, scene.reference);
  const int w = spec.width;
  const int h = spec.height;
  struct Extent {
    int x0 = std::numeric_limits<int>::max(), y0 = std::numeric_limits<int>::max(), x1 = -1, y1 = -1;
  };
  std::vector<Extent> extents(spec.shapes.size());
  for (int v = 0; v < h; ++v) {
    for (int u = 0; u < w; ++u) {
      const Hit hit = geometry.cast(scene.reference, u, v);
      if (hit.shape < 0) continue;
      Extent& e = extents[static_cast<std::size_t>(hit.shape)];
      e.x0 = std::min(e.x0, u);
      e.y0 = std::min(e.y0, v);
      e.x1 = std::max(e.x1, u);
      e.y1 = std::max(e.y1, v);
    }
  }
  for (std::size_t k = 0; k < extents.size(); ++k) {
    const Extent& e = extents[k];
    if (e.x1 < 0) continue;
    const int cls = spec.shapes[k].class_id;
    gt.boxes.push_back({cls, Box{double(e.x0), double(e.y0), double(e.x1 - e.x0 + 1), double(e.y1 - e.y0 + 1)}});
    gt.candidate_classes.insert(cls);
  }
  gt.labels = scene.gt_labels;
  return gt;
}

}  // namespace

SyntheticScene make_synthetic_scene(const SceneSpec& spec, const std::filesystem::path& out_dir, std::uint64_t seed) {
  SyntheticScene scene = render_synthetic_scene(spec, seed);
  std::filesystem::create_directories(out_dir);

  save_color(scene.rgb, out_dir / scene_files::kRgb);
  save_camera(scene.reference, out_dir / scene_files::kReferenceCamera);
  for (std::size_t i = 0; i < scene.sensor_depths.size(); ++i) {
    save_depth(scene.sensor_depths[i], out_dir / scene_files::depth_source(static_cast<int>(i)));
    save_camera(scene.sensor_cams[i], out_dir / scene_files::camera_source(static_cast<int>(i)));
  }
  save_labels(scene.gt_labels, out_dir / scene_files::kGtLabels);
  save_labels(scene.band_mask, out_dir / scene_files::kGtBandMask);
  FloatImage gt_depth(spec.width, spec.height);
  for (std::size_t i = 0; i < gt_depth.size(); ++i) gt_depth[i] = static_cast<float>(scene.gt_depth[i]);
  save_float_map(gt_depth, out_dir / scene_files::kGtDepth);

  const GroundTruthScene gt = ground_truth_boxes(spec, scene);
  save_json(ground_truth_to_json(gt), out_dir / scene_files::kGtBoxes);

  // Stand-ins for external network outputs, derived from ground truth with
  // their own random stream so they do not perturb the sensor noise.
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  std::uniform_int_distribution<int> shift(-3, 3);

  std::vector<Detection> dets;
  for (const auto& b : gt.boxes) {
    dets.push_back({b.class_id, 0.6 + 0.35 * uniform(rng),
                    Box{b.box.x + shift(rng), b.box.y + shift(rng), b.box.w + shift(rng), b.box.h + shift(rng)}});
  }
  const int fp_class = 1 + static_cast<int>(uniform(rng) * (scene.num_classes - 1)) % (scene.num_classes - 1);
  dets.push_back({fp_class, 0.2, Box{spec.width * 0.05, spec.height * 0.75, spec.width * 0.15, spec.height * 0.2}});
  save_detections(dets, out_dir / scene_files::kDetections);

  ProbabilityMap seg(spec.width, spec.height, scene.num_classes);
  for (std::size_t i = 0; i < scene.gt_labels.size(); ++i) {
    const int truth = scene.gt_labels[i];
    const double p_true = 0.45 + 0.5 * uniform(rng);
    const double rest = (1.0 - p_true) / std::max(1, scene.num_classes - 1);
    for (int k = 0; k < scene.num_classes; ++k) {
      seg.plane(k)[i] = static_cast<float>(k == truth ? p_true : rest);
    }
  }
  save_probability_map(seg, out_dir / scene_files::kSegmentationPrefix);
  return scene;
}

}  // namespace binpercept
