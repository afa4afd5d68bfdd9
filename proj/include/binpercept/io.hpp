#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "binpercept/camera.hpp"
#include "binpercept/image.hpp"
#include "binpercept/metrics.hpp"

namespace binpercept {

namespace fs = std::filesystem;

inline constexpr double kMillimeters = 0.001;

/// 16-bit single-channel PNG; raw 0 is invalid, other values scale to meters.
DepthMap load_depth(const fs::path& path, double scale = kMillimeters);
/// Rounds to the nearest raw unit. Invalid pixels are written as 0.
void save_depth(const DepthMap& depth, const fs::path& path, double scale = kMillimeters);

ColorImage load_color(const fs::path& path);
void save_color(const ColorImage& img, const fs::path& path);

/// 8-bit grayscale PNG; kIgnoreLabel is kept, other values must be < num_classes.
LabelMap load_labels(const fs::path& path, int num_classes);
void save_labels(const LabelMap& labels, const fs::path& path);

/// Single-channel little-endian PFM.
FloatImage load_float_map(const fs::path& path);
void save_float_map(const FloatImage& map, const fs::path& path);
/// Narrows to float32 on write.
void save_float_map(const Grid<double>& map, const fs::path& path);
WeightMap load_weight_map(const fs::path& path);

/// `<prefix>_c<k>.pfm`
fs::path class_plane_path(const fs::path& prefix, int k);
void save_probability_map(const ProbabilityMap& map, const fs::path& prefix);
/// Loads planes _c0, _c1, ... until the first missing file (at least _c0 must
/// exist) or exactly num_classes planes when given.
ProbabilityMap load_probability_map(const fs::path& prefix, std::optional<int> num_classes = std::nullopt);

std::vector<Detection> detections_from_json(const nlohmann::json& j, std::optional<int> num_classes = std::nullopt);
nlohmann::json detections_to_json(const std::vector<Detection>& dets);
std::vector<Detection> load_detections(const fs::path& path, std::optional<int> num_classes = std::nullopt);
void save_detections(const std::vector<Detection>& dets, const fs::path& path);

CameraModel camera_from_json(const nlohmann::json& j);
nlohmann::json camera_to_json(const CameraModel& cam);
CameraModel load_camera(const fs::path& path);
void save_camera(const CameraModel& cam, const fs::path& path);

/// {"boxes": [{"class_id", "bbox"}], "candidate_classes": [...]}; candidates
/// default to the box classes.
GroundTruthScene ground_truth_from_json(const nlohmann::json& j);
nlohmann::json ground_truth_to_json(const GroundTruthScene& gt);

nlohmann::json load_json(const fs::path& path);
void save_json(const nlohmann::json& j, const fs::path& path);
void save_text(const std::string& text, const fs::path& path);

/// CRC-32 of the file contents, as 8 lowercase hex digits.
std::string file_checksum(const fs::path& path);

}  // namespace binpercept
