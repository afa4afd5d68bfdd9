#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "binpercept/fusion.hpp"
#include "binpercept/hha.hpp"
#include "binpercept/posterior.hpp"
#include "binpercept/proposals.hpp"
#include "binpercept/tgv.hpp"

namespace binpercept {

struct StageToggles {
  bool reproject = true;
  bool fuse = true;
  bool densify = true;
  bool hha = true;
  bool propose = true;
  bool combine = true;
  bool argmax = true;
};

/// File names inside a scene directory, relative to it.
struct SceneLayout {
  std::vector<std::string> depth_sources;
  std::vector<std::string> camera_sources;
  std::string rgb;
  std::string reference_camera;
  std::string detections;
  std::string segmentation_prefix;
  double depth_scale = 0.001;
};

struct PipelineConfig {
  FusionConfig fusion;
  TgvConfig tgv;
  HhaConfig hha;
  bool hha_raw3 = false;
  int normal_window = 5;
  ProposalConfig proposals;
  CombineConfig combine;
  RenderMode render_mode = RenderMode::kGaussian;
  double min_prob = 0.0;
  StageToggles stages;
  SceneLayout layout;

  /// Layout of the synthetic scene generator with the shelf fusion weights.
  static PipelineConfig defaults();
  void validate() const;
};

/// Starts from defaults(); every key present overrides it. Unknown keys throw ConfigError.
PipelineConfig pipeline_config_from_json(const nlohmann::json& j);
nlohmann::json pipeline_config_to_json(const PipelineConfig& cfg);

struct Artifact {
  std::string path;  // relative to the output directory
  std::string checksum;
};

struct StageReport {
  std::string name;
  bool ran = false;
  double wall_ms = 0.0;
  std::vector<Artifact> artifacts;
};

struct PipelineSummary {
  std::vector<StageReport> stages;

  nlohmann::json to_json() const;
};

/// Runs reproject, fuse, densify, hha, propose, combine and argmax in order,
/// writing each stage's outputs and summary.json into out_dir. Errors are
/// rethrown with the failing stage name prepended.
PipelineSummary run_pipeline(const std::filesystem::path& scene_dir, const std::filesystem::path& out_dir,
                             const PipelineConfig& cfg);

}  // namespace binpercept
