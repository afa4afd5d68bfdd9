#include <cstdlib>
#include <fstream>
#include <set>

#include <sys/wait.h>

#include <gtest/gtest.h>

#include "binpercept/io.hpp"
#include "binpercept/pipeline.hpp"
#include "binpercept/synthetic.hpp"
#include "test_support.hpp"

using namespace binpercept;
using binpercept::testing::TempDir;

namespace {

PipelineConfig quick_config() {
  PipelineConfig cfg = PipelineConfig::defaults();
  cfg.tgv.max_iters = 150;
  return cfg;
}

std::map<std::string, std::string> checksums(const PipelineSummary& s) {
  std::map<std::string, std::string> out;
  for (const auto& stage : s.stages) {
    for (const auto& a : stage.artifacts) out[a.path] = a.checksum;
  }
  return out;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(BINPERCEPT_CLI) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(Synthetic, SingleBoxHasTwoClasses) {
  SceneSpec spec = SceneSpec::bundled();
  spec.shapes = {{1, Box{100, 80, 60, 50}, 0.9, Rgb{200, 30, 30}}};
  const SyntheticScene s = render_synthetic_scene(spec, 1);
  std::set<int> labels(s.gt_labels.values().begin(), s.gt_labels.values().end());
  EXPECT_EQ(labels, (std::set<int>{0, 1}));
  EXPECT_EQ(s.num_classes, 2);
  EXPECT_EQ(s.gt_labels.at(120, 100), 1);
  EXPECT_NEAR(s.gt_depth.at(120, 100), 0.9, 1e-12);
  EXPECT_NEAR(s.gt_depth.at(5, 5), spec.background_depth, 1e-12);
}

TEST(Synthetic, EmptySpecRejected) {
  SceneSpec spec = SceneSpec::bundled();
  spec.shapes.clear();
  EXPECT_THROW(render_synthetic_scene(spec, 1), InputError);
}

TEST(Synthetic, SeedIsDeterministic) {
  const SyntheticScene a = render_synthetic_scene(SceneSpec::bundled(), 5);
  const SyntheticScene b = render_synthetic_scene(SceneSpec::bundled(), 5);
  const SyntheticScene c = render_synthetic_scene(SceneSpec::bundled(), 6);
  EXPECT_EQ(a.sensor_depths, b.sensor_depths);
  EXPECT_EQ(a.rgb, b.rgb);
  EXPECT_NE(a.sensor_depths, c.sensor_depths);
}

TEST(Synthetic, BandOnlyCorruptsSecondSensor) {
  const SyntheticScene s = render_synthetic_scene(SceneSpec::bundled(), 3);
  std::size_t band = 0;
  for (auto v : s.band_mask.values()) band += v != 0;
  EXPECT_GT(band, 1000u);
  // The first sensor shares the reference frame and stays within noise of the truth.
  for (std::size_t i = 0; i < s.gt_depth.size(); ++i) {
    if (s.sensor_depths[0].valid(i)) {
      EXPECT_LT(std::abs(s.sensor_depths[0][i] - s.gt_depth[i]), 0.01);
    }
  }
}

TEST(Synthetic, SpecFromJson) {
  const auto j = nlohmann::json::parse(
      R"({"width": 64, "height": 48, "shapes": [{"class_id": 2, "rect": [10, 10, 20, 20], "depth": 0.7}],
          "band": {"x0": 5, "x1": 15}})");
  const SceneSpec spec = scene_spec_from_json(j);
  EXPECT_EQ(spec.width, 64);
  ASSERT_EQ(spec.shapes.size(), 1u);
  EXPECT_EQ(spec.shapes[0].class_id, 2);
  EXPECT_EQ(spec.band.x1, 15);
  EXPECT_THROW(scene_spec_from_json(nlohmann::json::parse(R"({"widht": 3})")), ConfigError);
}

TEST(PipelineConfig, JsonRoundTripAndUnknownKeys) {
  PipelineConfig cfg = PipelineConfig::defaults();
  cfg.tgv.max_iters = 77;
  cfg.stages.hha = false;
  cfg.render_mode = RenderMode::kBox;
  const PipelineConfig back = pipeline_config_from_json(pipeline_config_to_json(cfg));
  EXPECT_EQ(pipeline_config_to_json(back), pipeline_config_to_json(cfg));

  EXPECT_THROW(pipeline_config_from_json(nlohmann::json::parse(R"({"tgv": {"iters": 5}})")), ConfigError);
  EXPECT_THROW(pipeline_config_from_json(nlohmann::json::parse(R"({"extra": 1})")), ConfigError);
  EXPECT_THROW(pipeline_config_from_json(nlohmann::json::parse(R"({"fusion": {"alphas": [1, 2]}})")), ConfigError);
  EXPECT_THROW(pipeline_config_from_json(nlohmann::json::parse(R"({"tgv": {"max_iters": "many"}})")), ConfigError);
  EXPECT_THROW(pipeline_config_from_json(nlohmann::json::parse(R"({"combine": {"mode": "disc"}})")), ConfigError);
}

TEST(Pipeline, BundledSceneProducesEveryArtifact) {
  TempDir tmp;
  make_synthetic_scene(SceneSpec::bundled(), tmp / "scene", 1);
  const PipelineSummary s = run_pipeline(tmp / "scene", tmp / "out", quick_config());
  ASSERT_EQ(s.stages.size(), 7u);
  const std::vector<std::string> names{"reproject", "fuse", "densify", "hha", "propose", "combine", "argmax"};
  for (std::size_t i = 0; i < names.size(); ++i) {
    EXPECT_EQ(s.stages[i].name, names[i]);
    EXPECT_TRUE(s.stages[i].ran);
    EXPECT_FALSE(s.stages[i].artifacts.empty());
    for (const auto& a : s.stages[i].artifacts) EXPECT_TRUE(fs::exists(tmp / "out" / a.path)) << a.path;
  }
  EXPECT_TRUE(fs::exists(tmp / "out" / "summary.json"));
  const LabelMap labels = load_labels(tmp / "out" / "labels.png", 4);
  EXPECT_EQ(labels.width(), 320);
}

TEST(Pipeline, RunsAreByteIdentical) {
  TempDir tmp;
  make_synthetic_scene(SceneSpec::bundled(), tmp / "scene", 2);
  const auto a = checksums(run_pipeline(tmp / "scene", tmp / "a", quick_config()));
  const auto b = checksums(run_pipeline(tmp / "scene", tmp / "b", quick_config()));
  EXPECT_EQ(a, b);
  EXPECT_EQ(a.size(), 15u);
}

TEST(Pipeline, DisablingLaterStagesKeepsEarlierOutputs) {
  TempDir tmp;
  make_synthetic_scene(SceneSpec::bundled(), tmp / "scene", 3);
  const auto full = checksums(run_pipeline(tmp / "scene", tmp / "full", quick_config()));
  PipelineConfig partial = quick_config();
  partial.stages.densify = false;
  partial.stages.combine = false;
  const PipelineSummary s = run_pipeline(tmp / "scene", tmp / "partial", partial);
  EXPECT_FALSE(s.stages[2].ran);
  EXPECT_FALSE(s.stages[5].ran);
  for (const auto& [path, sum] : checksums(s)) {
    if (path.starts_with("reprojected_") || path.starts_with("fused_")) {
      EXPECT_EQ(full.at(path), sum) << path;
    }
  }
  EXPECT_FALSE(fs::exists(tmp / "partial" / "dense_depth.png"));
  EXPECT_TRUE(fs::exists(tmp / "partial" / "labels.png"));
}

TEST(Pipeline, MissingSegmentationNamesCombine) {
  TempDir tmp;
  make_synthetic_scene(SceneSpec::bundled(), tmp / "scene", 4);
  fs::remove_all(tmp / "scene" / "segmentation");
  PipelineConfig cfg = quick_config();
  cfg.stages.densify = false;
  try {
    run_pipeline(tmp / "scene", tmp / "out", cfg);
    FAIL() << "expected InputError";
  } catch (const InputError& e) {
    const std::string msg = e.what();
    EXPECT_EQ(msg.rfind("combine", 0), 0u) << msg;
    EXPECT_NE(msg.find("seg_c0.pfm"), std::string::npos) << msg;
  }
}

TEST(Pipeline, MissingSceneDirectory) {
  TempDir tmp;
  EXPECT_THROW(run_pipeline(tmp / "nothing", tmp / "out", quick_config()), InputError);
}

TEST(Cli, ExitCodes) {
  TempDir tmp;
  const std::string out = (tmp / "scene").string();
  EXPECT_EQ(run_cli("--out " + out + " --seed 3 synth"), 0);
  EXPECT_TRUE(fs::exists(tmp / "scene" / "depth_0.png"));

  save_text(R"({"tgv": {"unknown": 1}})", tmp / "bad.json");
  EXPECT_EQ(run_cli("--config " + (tmp / "bad.json").string() + " --out " + (tmp / "o").string() +
                    " pipeline --scene " + out),
            3);
  EXPECT_EQ(run_cli("--out " + (tmp / "o").string() + " pipeline --scene " + (tmp / "absent").string()), 2);
  EXPECT_EQ(run_cli("no-such-command"), 3);

  EXPECT_EQ(run_cli("--out " + (tmp / "eval").string() + " evaluate-detections --detections " + out +
                    "/detections.json --gt " + out + "/gt/boxes.json"),
            0);
  const auto metrics = load_json(tmp / "eval" / "detection_metrics.json");
  EXPECT_GT(metrics.at("mean_ap").get<double>(), 0.5);

  EXPECT_EQ(run_cli("--out " + (tmp / "eval").string() + " evaluate-segmentation --pred " + out +
                    "/gt/labels.png --gt " + out + "/gt/labels.png --classes 4"),
            0);
  EXPECT_EQ(load_json(tmp / "eval" / "segmentation_metrics.json").at("mean_f1").get<double>(), 1.0);

  save_text(R"({"scenes": [{"id": "a", "labels": ["x"]}, {"id": "b", "labels": ["x", "y"]},
                           {"id": "c", "labels": ["y"]}, {"id": "d", "labels": ["x"]}]})",
            tmp / "index.json");
  EXPECT_EQ(run_cli("--out " + (tmp / "split").string() + " split --index " + (tmp / "index.json").string() +
                    " --folds 2"),
            0);
  EXPECT_EQ(load_json(tmp / "split" / "folds.json").at("assignment").size(), 4u);
}
