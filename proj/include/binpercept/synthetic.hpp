#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include <nlohmann/json.hpp>

#include "binpercept/camera.hpp"
#include "binpercept/image.hpp"

namespace binpercept {

/// Fronto-parallel rectangle in the reference view, placed at a fixed depth.
struct SceneShape {
  int class_id = 1;
  Box rect;  // pixel rectangle in the reference image
  double depth = 1.0;
  Rgb color{200, 60, 60};
};

struct CorruptionBand {
  int x0 = 0;  // column range in sensor 1's image
  int x1 = 0;
  double min_offset = 0.06;
  double max_offset = 0.15;
};

struct SceneSpec {
  int width = 320;
  int height = 240;
  double fx = 300.0;
  double fy = 300.0;
  double background_depth = 1.2;
  Rgb background_color{180, 180, 170};
  std::vector<SceneShape> shapes;
  double sensor_baseline = 0.04;  // x offset of the second RGB-D sensor, meters
  double sensor_noise = 0.001;
  double stereo_noise = 0.005;
  double dropout = 0.05;
  double stereo_dropout = 0.15;
  CorruptionBand band{250, 300};

  /// Three colored boxes in front of a wall with a corrupted band on the second sensor.
  static SceneSpec bundled();
  void validate() const;
};

SceneSpec scene_spec_from_json(const nlohmann::json& j);

/// Scene file layout shared by the generator and the pipeline.
namespace scene_files {
inline constexpr const char* kRgb = "rgb.png";
inline constexpr const char* kReferenceCamera = "camera_ref.json";
inline constexpr const char* kDetections = "detections.json";
inline constexpr const char* kSegmentationPrefix = "segmentation/seg";
inline constexpr const char* kGtLabels = "gt/labels.png";
inline constexpr const char* kGtBoxes = "gt/boxes.json";
inline constexpr const char* kGtDepth = "gt/depth.pfm";
inline constexpr const char* kGtBandMask = "gt/band_mask.png";
std::string depth_source(int i);   // depth_<i>.png
std::string camera_source(int i);  // camera_<i>.json
}  // namespace scene_files

struct SyntheticScene {
  CameraModel reference;
  std::vector<CameraModel> sensor_cams;  // RGB-D 0, RGB-D 1, stereo
  std::vector<DepthMap> sensor_depths;
  ColorImage rgb;
  LabelMap gt_labels;
  DepthMap gt_depth;        // reference frame
  LabelMap band_mask;       // reference-frame pixels seen through the corrupted band
  int num_classes = 0;      // background + max shape class
};

/// Ray-casts the scene for each sensor. Deterministic for a given seed.
SyntheticScene render_synthetic_scene(const SceneSpec& spec, std::uint64_t seed);

/// Renders and writes every scene file (plus simulated detector and
/// segmentation outputs) under out_dir.
SyntheticScene make_synthetic_scene(const SceneSpec& spec, const std::filesystem::path& out_dir, std::uint64_t seed);

}  // namespace binpercept
