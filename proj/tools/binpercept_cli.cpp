#include <cstdio>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "binpercept/errors.hpp"
#include "binpercept/folds.hpp"
#include "binpercept/geometry.hpp"
#include "binpercept/io.hpp"
#include "binpercept/metrics.hpp"
#include "binpercept/parallel.hpp"
#include "binpercept/pipeline.hpp"
#include "binpercept/synthetic.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace binpercept;

namespace {

enum ExitCode { kOk = 0, kInputError = 2, kConfigError = 3, kInternalError = 4 };

struct GlobalOptions {
  std::string config;
  std::string out = ".";
  int threads = 1;
  std::uint64_t seed = 0;
};

PipelineConfig load_config(const GlobalOptions& g) {
  if (g.config.empty()) return PipelineConfig::defaults();
  if (!fs::exists(g.config)) throw ConfigError("config file " + g.config + " does not exist");
  json j;
  try {
    j = load_json(g.config);
  } catch (const InputError& e) {
    throw ConfigError(e.what());
  }
  return pipeline_config_from_json(j);
}

WeightMap unit_weights(const DepthMap& d) {
  WeightMap w(d.width(), d.height(), 0.0);
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = d.valid(i) ? 1.0 : 0.0;
  return w;
}

std::string fixed(double v, int precision = 4) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(precision) << v;
  return s.str();
}

void print_table(const std::vector<std::string>& header, const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> width(header.size());
  for (std::size_t c = 0; c < header.size(); ++c) width[c] = header[c].size();
  for (const auto& r : rows) {
    for (std::size_t c = 0; c < r.size(); ++c) width[c] = std::max(width[c], r[c].size());
  }
  auto line = [&](const std::vector<std::string>& r) {
    for (std::size_t c = 0; c < r.size(); ++c) {
      std::cout << (c ? "  " : "") << std::setw(static_cast<int>(width[c])) << r[c];
    }
    std::cout << '\n';
  };
  line(header);
  for (const auto& r : rows) line(r);
}

DatasetIndex dataset_index_from_json(const json& j) {
  DatasetIndex index;
  try {
    const json& scenes = j.is_array() ? j : j.at("scenes");
    for (const auto& s : scenes) {
      index.scenes.push_back({s.at("id").get<std::string>(), s.at("labels").get<std::vector<std::string>>()});
    }
  } catch (const json::exception& e) {
    throw InputError(std::string("malformed dataset index: ") + e.what());
  }
  index.validate();
  return index;
}

struct FuseArgs {
  std::vector<std::string> depth;
  std::vector<std::string> cameras;
  std::string reference;
};

int cmd_fuse(const GlobalOptions& g, const FuseArgs& a) {
  const PipelineConfig cfg = load_config(g);
  if (!a.cameras.empty() && a.cameras.size() != a.depth.size()) {
    throw InputError("give one --camera per --depth, or none");
  }
  if (!a.cameras.empty() && a.reference.empty()) throw InputError("--camera needs --reference");
  std::optional<CameraModel> ref;
  if (!a.reference.empty()) ref = load_camera(a.reference);
  std::vector<DepthMap> sources;
  for (std::size_t i = 0; i < a.depth.size(); ++i) {
    DepthMap d = load_depth(a.depth[i], cfg.layout.depth_scale);
    if (!a.cameras.empty()) d = reproject_depth(d, load_camera(a.cameras[i]), *ref);
    sources.push_back(std::move(d));
  }
  FusionConfig fc = cfg.fusion;
  if (fc.alphas.size() != sources.size()) {
    throw ConfigError("fusion.alphas has " + std::to_string(fc.alphas.size()) + " entries for " +
                      std::to_string(sources.size()) + " depth sources");
  }
  const FusedDepth fused = fuse(sources, fc);
  const fs::path out(g.out);
  save_depth(fused.depth, out / "fused_depth.png", cfg.layout.depth_scale);
  save_float_map(fused.weight, out / "fused_weight.pfm");
  std::cout << "fused " << sources.size() << " sources, " << fused.depth.valid_count() << " valid pixels\n";
  return kOk;
}

struct DensifyArgs {
  std::string depth;
  std::string weights;
  std::string rgb;
};

int cmd_densify(const GlobalOptions& g, const DensifyArgs& a) {
  const PipelineConfig cfg = load_config(g);
  const DepthMap depth = load_depth(a.depth, cfg.layout.depth_scale);
  const WeightMap weights = a.weights.empty() ? unit_weights(depth) : load_weight_map(a.weights);
  const ColorImage rgb = load_color(a.rgb);
  const DensifyResult r = densify(depth, weights, rgb, cfg.tgv);
  const fs::path out(g.out);
  save_depth(r.depth, out / "dense_depth.png", cfg.layout.depth_scale);
  std::ostringstream csv;
  csv << "iteration,energy\n" << std::setprecision(17);
  for (const auto& s : r.energy_trace) csv << s.iteration << ',' << s.energy << '\n';
  save_text(csv.str(), out / "energy.csv");
  std::cout << "densified in " << r.iterations_run << " iterations, final energy "
            << r.energy_trace.back().energy << '\n';
  return kOk;
}

struct GeometryArgs {
  std::string depth;
  std::string camera;
  std::string rgb;
  bool raw3 = false;
};

int cmd_hha(const GlobalOptions& g, const GeometryArgs& a) {
  const PipelineConfig cfg = load_config(g);
  const DepthMap depth = load_depth(a.depth, cfg.layout.depth_scale);
  ColorImage img;
  if (a.raw3 || cfg.hha_raw3) {
    img = encode_raw3(depth, cfg.hha);
  } else {
    if (a.camera.empty()) throw InputError("hha encoding needs --camera");
    const CameraModel cam = load_camera(a.camera);
    img = encode_hha(depth, cam, estimate_normals(depth, cam, cfg.normal_window), cfg.hha);
  }
  save_color(img, fs::path(g.out) / "hha.png");
  return kOk;
}

int cmd_propose(const GlobalOptions& g, const GeometryArgs& a) {
  const PipelineConfig cfg = load_config(g);
  const DepthMap depth = load_depth(a.depth, cfg.layout.depth_scale);
  const CameraModel cam = load_camera(a.camera);
  const ColorImage rgb = load_color(a.rgb);
  const RegionLabeling labeling = connected_components(rgb, back_project(depth, cam),
                                                       estimate_normals(depth, cam, cfg.normal_window), cfg.proposals);
  const auto boxes =
      extract_boxes(labeling, cfg.proposals, static_cast<double>(depth.width()) * depth.height());
  save_detections(boxes, fs::path(g.out) / "proposals.json");
  std::cout << labeling.region_count << " regions, " << boxes.size() << " proposals\n";
  return kOk;
}

struct CombineArgs {
  std::string seg;
  std::string detections;
  bool box_mode = false;
};

int cmd_combine(const GlobalOptions& g, const CombineArgs& a) {
  const PipelineConfig cfg = load_config(g);
  const ProbabilityMap seg = load_probability_map(a.seg);
  const auto dets = load_detections(a.detections, seg.num_classes());
  const RenderMode mode = a.box_mode ? RenderMode::kBox : cfg.render_mode;
  const ProbabilityMap p_det = render_detection_map(dets, seg.width(), seg.height(), seg.num_classes(), cfg.combine, mode);
  const ProbabilityMap combined = combine(seg, p_det, cfg.combine);
  const fs::path out(g.out);
  save_probability_map(combined, out / "combined");
  save_labels(argmax_labels(combined, cfg.min_prob), out / "labels.png");
  return kOk;
}

struct EvalDetArgs {
  std::vector<std::string> detections;
  std::vector<std::string> ground_truth;
  double iou = 0.5;
  bool informed = false;
};

int cmd_evaluate_detections(const GlobalOptions& g, const EvalDetArgs& a) {
  if (a.detections.size() != a.ground_truth.size()) {
    throw InputError("give one --gt per --detections file");
  }
  std::vector<std::vector<Detection>> dets;
  std::vector<GroundTruthScene> gts;
  for (std::size_t i = 0; i < a.detections.size(); ++i) {
    dets.push_back(load_detections(a.detections[i]));
    GroundTruthScene gt = ground_truth_from_json(load_json(a.ground_truth[i]));
    if (gt.id.empty()) gt.id = a.ground_truth[i];
    gts.push_back(std::move(gt));
  }
  const MapResult r = mean_average_precision(dets, gts, a.iou, a.informed);
  json per_class = json::object();
  std::vector<std::vector<std::string>> rows;
  for (const auto& [cls, ap] : r.per_class_ap) {
    per_class[std::to_string(cls)] = ap;
    rows.push_back({std::to_string(cls), fixed(ap)});
  }
  rows.push_back({"mean", fixed(r.mean_ap)});
  save_json({{"mean_ap", r.mean_ap}, {"per_class_ap", per_class}, {"iou_threshold", a.iou}, {"informed", a.informed}},
            fs::path(g.out) / "detection_metrics.json");
  print_table({"class", "AP"}, rows);
  return kOk;
}

struct EvalSegArgs {
  std::vector<std::string> pred;
  std::vector<std::string> ground_truth;
  int num_classes = 0;
};

int cmd_evaluate_segmentation(const GlobalOptions& g, const EvalSegArgs& a) {
  if (a.pred.size() != a.ground_truth.size()) throw InputError("give one --gt per --pred image");
  if (a.num_classes < 1) throw InputError("--classes must be at least 1");
  ConfusionMatrix cm(a.num_classes);
  for (std::size_t i = 0; i < a.pred.size(); ++i) {
    // Predictions may carry labels outside the class range; they count as misses.
    cm.accumulate(load_labels(a.pred[i], 255), load_labels(a.ground_truth[i], a.num_classes));
  }
  const PixelF1Result r = f1_from_confusion(cm);
  json classes = json::array();
  std::vector<std::vector<std::string>> rows;
  for (int c = 0; c < a.num_classes; ++c) {
    const auto k = static_cast<std::size_t>(c);
    classes.push_back({{"class", c},
                       {"present", static_cast<bool>(r.present[k])},
                       {"precision", r.precision[k]},
                       {"recall", r.recall[k]},
                       {"f1", r.f1[k]}});
    rows.push_back({std::to_string(c), r.present[k] ? "yes" : "no", fixed(r.precision[k]), fixed(r.recall[k]),
                    fixed(r.f1[k])});
  }
  save_json({{"mean_f1", r.mean_f1}, {"classes", classes}}, fs::path(g.out) / "segmentation_metrics.json");
  print_table({"class", "present", "precision", "recall", "F1"}, rows);
  std::cout << "mean F1 " << fixed(r.mean_f1) << '\n';
  return kOk;
}

struct SplitArgs {
  std::string index;
  int folds = 5;
};

int cmd_split(const GlobalOptions& g, const SplitArgs& a) {
  const DatasetIndex index = dataset_index_from_json(load_json(a.index));
  const std::vector<int> folds = stratified_folds(index, a.folds, g.seed);
  json assignment = json::array();
  for (std::size_t i = 0; i < folds.size(); ++i) {
    assignment.push_back({{"id", index.scenes[i].id}, {"fold", folds[i]}});
  }
  save_json({{"folds", a.folds}, {"seed", g.seed}, {"assignment", assignment}}, fs::path(g.out) / "folds.json");
  std::vector<int> sizes(static_cast<std::size_t>(a.folds), 0);
  for (int f : folds) ++sizes[static_cast<std::size_t>(f)];
  std::vector<std::vector<std::string>> rows;
  for (int f = 0; f < a.folds; ++f) rows.push_back({std::to_string(f), std::to_string(sizes[static_cast<std::size_t>(f)])});
  print_table({"fold", "scenes"}, rows);
  return kOk;
}

int cmd_pipeline(const GlobalOptions& g, const std::string& scene) {
  const PipelineConfig cfg = load_config(g);
  const PipelineSummary summary = run_pipeline(scene, g.out, cfg);
  std::vector<std::vector<std::string>> rows;
  for (const auto& s : summary.stages) {
    rows.push_back({s.name, s.ran ? "ran" : "skipped", fixed(s.wall_ms, 1), std::to_string(s.artifacts.size())});
  }
  print_table({"stage", "status", "ms", "artifacts"}, rows);
  return kOk;
}

int cmd_synth(const GlobalOptions& g, const std::string& spec_path) {
  const SceneSpec spec = spec_path.empty() ? SceneSpec::bundled() : scene_spec_from_json(load_json(spec_path));
  const SyntheticScene scene = make_synthetic_scene(spec, g.out, g.seed);
  std::cout << "wrote " << spec.width << "x" << spec.height << " scene with " << scene.num_classes
            << " classes to " << g.out << '\n';
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Shelf perception toolkit: depth fusion, densification, proposals and evaluation"};
  app.require_subcommand(1);
  GlobalOptions g;
  app.add_option("--config", g.config, "Pipeline configuration JSON");
  app.add_option("--out", g.out, "Output directory")->capture_default_str();
  app.add_option("--threads", g.threads, "Worker threads for row-parallel stages")->check(CLI::PositiveNumber);
  app.add_option("--seed", g.seed, "Seed for synthetic scenes and fold tie-breaking");

  FuseArgs fuse_args;
  auto* fuse_cmd = app.add_subcommand("fuse", "Fuse depth maps into one weighted depth map");
  fuse_cmd->add_option("--depth", fuse_args.depth, "Depth PNG, repeat per source")->required();
  fuse_cmd->add_option("--camera", fuse_args.cameras, "Camera JSON per source; enables reprojection");
  fuse_cmd->add_option("--reference", fuse_args.reference, "Reference camera JSON");

  DensifyArgs densify_args;
  auto* densify_cmd = app.add_subcommand("densify", "Fill sparse depth with guided TGV");
  densify_cmd->add_option("--depth", densify_args.depth, "Sparse depth PNG")->required();
  densify_cmd->add_option("--weights", densify_args.weights, "Per-pixel weight PFM (default 1 on valid pixels)");
  densify_cmd->add_option("--rgb", densify_args.rgb, "Guide color image")->required();

  GeometryArgs hha_args;
  auto* hha_cmd = app.add_subcommand("hha", "Encode depth as HHA");
  hha_cmd->add_option("--depth", hha_args.depth, "Dense depth PNG")->required();
  hha_cmd->add_option("--camera", hha_args.camera, "Camera JSON");
  hha_cmd->add_flag("--raw3", hha_args.raw3, "Replicate normalized depth into three channels instead");

  GeometryArgs propose_args;
  auto* propose_cmd = app.add_subcommand("propose", "Region proposals from RGB-D connected components");
  propose_cmd->add_option("--depth", propose_args.depth, "Depth PNG")->required();
  propose_cmd->add_option("--camera", propose_args.camera, "Camera JSON")->required();
  propose_cmd->add_option("--rgb", propose_args.rgb, "Color image")->required();

  CombineArgs combine_args;
  auto* combine_cmd = app.add_subcommand("combine", "Weight segmentation posteriors by detections");
  combine_cmd->add_option("--seg", combine_args.seg, "Segmentation plane prefix (<prefix>_c<k>.pfm)")->required();
  combine_cmd->add_option("--detections", combine_args.detections, "Detections JSON")->required();
  combine_cmd->add_flag("--box", combine_args.box_mode, "Render detections as flat boxes");

  EvalDetArgs eval_det_args;
  auto* eval_det_cmd = app.add_subcommand("evaluate-detections", "Mean average precision over scenes");
  eval_det_cmd->add_option("--detections", eval_det_args.detections, "Detections JSON, one per scene")->required();
  eval_det_cmd->add_option("--gt", eval_det_args.ground_truth, "Ground truth boxes JSON, one per scene")->required();
  eval_det_cmd->add_option("--iou", eval_det_args.iou, "IoU threshold")->capture_default_str();
  eval_det_cmd->add_flag("--informed", eval_det_args.informed, "Drop detections of classes absent from the scene");

  EvalSegArgs eval_seg_args;
  auto* eval_seg_cmd = app.add_subcommand("evaluate-segmentation", "Pixel-wise F1 per class");
  eval_seg_cmd->add_option("--pred", eval_seg_args.pred, "Predicted label PNG, one per scene")->required();
  eval_seg_cmd->add_option("--gt", eval_seg_args.ground_truth, "Ground truth label PNG, one per scene")->required();
  eval_seg_cmd->add_option("--classes", eval_seg_args.num_classes, "Number of classes")->required();

  SplitArgs split_args;
  auto* split_cmd = app.add_subcommand("split", "Stratified k-fold assignment of a multi-label dataset");
  split_cmd->add_option("--index", split_args.index, "Dataset index JSON")->required();
  split_cmd->add_option("--folds", split_args.folds, "Number of folds")->capture_default_str();

  std::string scene_dir;
  auto* pipeline_cmd = app.add_subcommand("pipeline", "Run every stage on a scene directory");
  pipeline_cmd->add_option("--scene", scene_dir, "Scene directory")->required();

  std::string spec_path;
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic shelf scene");
  synth_cmd->add_option("--spec", spec_path, "Scene spec JSON (default: bundled scene)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfigError;
  }

  try {
    set_thread_count(g.threads);
    fs::create_directories(g.out);
    if (*fuse_cmd) return cmd_fuse(g, fuse_args);
    if (*densify_cmd) return cmd_densify(g, densify_args);
    if (*hha_cmd) return cmd_hha(g, hha_args);
    if (*propose_cmd) return cmd_propose(g, propose_args);
    if (*combine_cmd) return cmd_combine(g, combine_args);
    if (*eval_det_cmd) return cmd_evaluate_detections(g, eval_det_args);
    if (*eval_seg_cmd) return cmd_evaluate_segmentation(g, eval_seg_args);
    if (*split_cmd) return cmd_split(g, split_args);
    if (*pipeline_cmd) return cmd_pipeline(g, scene_dir);
    if (*synth_cmd) return cmd_synth(g, spec_path);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const InputError& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return kInputError;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return kInputError;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return kInternalError;
  }
  return kInternalError;
}
