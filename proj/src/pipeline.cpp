#include "binpercept/pipeline.hpp"

#include <chrono>
#include <functional>
#include <iomanip>
#include <optional>
#include <set>
#include <sstream>

#include "binpercept/errors.hpp"
#include "binpercept/geometry.hpp"
#include "binpercept/io.hpp"
#include "binpercept/synthetic.hpp"

namespace binpercept {

using nlohmann::json;

PipelineConfig PipelineConfig::defaults() {
  PipelineConfig cfg;
  cfg.fusion.alphas = {kAlphaRgbd, kAlphaRgbd, kAlphaStereo};
  cfg.normal_window = kDefaultNormalWindow;
  for (int i = 0; i < 3; ++i) {
    cfg.layout.depth_sources.push_back(scene_files::depth_source(i));
    cfg.layout.camera_sources.push_back(scene_files::camera_source(i));
  }
  cfg.layout.rgb = scene_files::kRgb;
  cfg.layout.reference_camera = scene_files::kReferenceCamera;
  cfg.layout.detections = scene_files::kDetections;
  cfg.layout.segmentation_prefix = scene_files::kSegmentationPrefix;
  return cfg;
}

void PipelineConfig::validate() const {
  fusion.validate();
  tgv.validate();
  hha.validate();
  proposals.validate();
  combine.validate();
  if (normal_window < 3 || normal_window % 2 == 0) throw ConfigError("normal window must be odd and >= 3");
  if (!(min_prob >= 0.0 && min_prob <= 1.0)) throw ConfigError("min_prob must be in [0, 1]");
  if (layout.depth_sources.empty()) throw ConfigError("layout needs at least one depth source");
  if (layout.depth_sources.size() != layout.camera_sources.size()) {
    throw ConfigError("layout needs one camera per depth source");
  }
  if (fusion.alphas.size() != layout.depth_sources.size()) {
    throw ConfigError("fusion needs one alpha per depth source (" + std::to_string(layout.depth_sources.size()) +
                      "), got " + std::to_string(fusion.alphas.size()));
  }
  if (!(layout.depth_scale > 0.0)) throw ConfigError("depth_scale must be positive");
}

namespace {

/// Reads optional keys from one JSON object and rejects anything it did not consume.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ConfigError("config section '" + where_ + "' must be an object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    if (!j_.contains(key)) return;
    seen_.insert(key);
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw ConfigError("config key '" + where_ + "." + key + "': " + e.what());
    }
  }

  std::optional<ObjectReader> child(const char* key) {
    if (!j_.contains(key)) return std::nullopt;
    seen_.insert(key);
    return ObjectReader(j_.at(key), where_.empty() ? key : where_ + "." + key);
  }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.count(key)) {
        throw ConfigError("unknown config key '" + (where_.empty() ? key : where_ + "." + key) + "'");
      }
    }
  }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

std::string render_mode_name(RenderMode m) { return m == RenderMode::kGaussian ? "gaussian" : "box"; }

}  // namespace

PipelineConfig pipeline_config_from_json(const json& j) {
  PipelineConfig cfg = PipelineConfig::defaults();
  ObjectReader root(j, "");
  if (auto r = root.child("fusion")) {
    r->get("alphas", cfg.fusion.alphas);
    r->get("max_spread", cfg.fusion.max_spread);
    r->finish();
  }
  if (auto r = root.child("tgv")) {
    r->get("alpha0", cfg.tgv.alpha0);
    r->get("alpha1", cfg.tgv.alpha1);
    r->get("tensor_beta", cfg.tgv.tensor_beta);
    r->get("tensor_gamma", cfg.tgv.tensor_gamma);
    r->get("max_iters", cfg.tgv.max_iters);
    r->get("check_every", cfg.tgv.check_every);
    r->get("rel_tol", cfg.tgv.rel_tol);
    r->finish();
  }
  if (auto r = root.child("hha")) {
    std::vector<double> g;
    r->get("gravity", g);
    if (!g.empty()) {
      if (g.size() != 3) throw ConfigError("config key 'hha.gravity' must have 3 components");
      cfg.hha.gravity = Eigen::Vector3d(g[0], g[1], g[2]);
    }
    r->get("min_depth", cfg.hha.min_depth);
    r->get("max_depth", cfg.hha.max_depth);
    r->get("ground_percentile", cfg.hha.ground_percentile);
    r->get("height_range", cfg.hha.height_range);
    r->get("raw3", cfg.hha_raw3);
    r->finish();
  }
  if (auto r = root.child("normals")) {
    r->get("window", cfg.normal_window);
    r->finish();
  }
  if (auto r = root.child("proposals")) {
    r->get("max_pos_diff", cfg.proposals.max_pos_diff);
    r->get("max_normal_angle", cfg.proposals.max_normal_angle);
    r->get("max_sat_diff", cfg.proposals.max_sat_diff);
    r->get("max_color_diff", cfg.proposals.max_color_diff);
    r->get("min_area_frac", cfg.proposals.min_area_frac);
    r->finish();
  }
  if (auto r = root.child("combine")) {
    r->get("prior_floor", cfg.combine.prior_floor);
    r->get("det_weight", cfg.combine.det_weight);
    r->get("sigma_frac", cfg.combine.sigma_frac);
    std::string mode;
    r->get("mode", mode);
    if (!mode.empty()) cfg.render_mode = parse_render_mode(mode);
    r->get("min_prob", cfg.min_prob);
    r->finish();
  }
  if (auto r = root.child("stages")) {
    r->get("reproject", cfg.stages.reproject);
    r->get("fuse", cfg.stages.fuse);
    r->get("densify", cfg.stages.densify);
    r->get("hha", cfg.stages.hha);
    r->get("propose", cfg.stages.propose);
    r->get("combine", cfg.stages.combine);
    r->get("argmax", cfg.stages.argmax);
    r->finish();
  }
  if (auto r = root.child("layout")) {
    r->get("depth_sources", cfg.layout.depth_sources);
    r->get("camera_sources", cfg.layout.camera_sources);
    r->get("rgb", cfg.layout.rgb);
    r->get("reference_camera", cfg.layout.reference_camera);
    r->get("detections", cfg.layout.detections);
    r->get("segmentation_prefix", cfg.layout.segmentation_prefix);
    r->get("depth_scale", cfg.layout.depth_scale);
    r->finish();
  }
  root.finish();
  cfg.validate();
  return cfg;
}

json pipeline_config_to_json(const PipelineConfig& cfg) {
  const auto& g = cfg.hha.gravity;
  return json{
      {"fusion", {{"alphas", cfg.fusion.alphas}, {"max_spread", cfg.fusion.max_spread}}},
      {"tgv",
       {{"alpha0", cfg.tgv.alpha0},
        {"alpha1", cfg.tgv.alpha1},
        {"tensor_beta", cfg.tgv.tensor_beta},
        {"tensor_gamma", cfg.tgv.tensor_gamma},
        {"max_iters", cfg.tgv.max_iters},
        {"check_every", cfg.tgv.check_every},
        {"rel_tol", cfg.tgv.rel_tol}}},
      {"hha",
       {{"gravity", {g.x(), g.y(), g.z()}},
        {"min_depth", cfg.hha.min_depth},
        {"max_depth", cfg.hha.max_depth},
        {"ground_percentile", cfg.hha.ground_percentile},
        {"height_range", cfg.hha.height_range},
        {"raw3", cfg.hha_raw3}}},
      {"normals", {{"window", cfg.normal_window}}},
      {"proposals",
       {{"max_pos_diff", cfg.proposals.max_pos_diff},
        {"max_normal_angle", cfg.proposals.max_normal_angle},
        {"max_sat_diff", cfg.proposals.max_sat_diff},
        {"max_color_diff", cfg.proposals.max_color_diff},
        {"min_area_frac", cfg.proposals.min_area_frac}}},
      {"combine",
       {{"prior_floor", cfg.combine.prior_floor},
        {"det_weight", cfg.combine.det_weight},
        {"sigma_frac", cfg.combine.sigma_frac},
        {"mode", render_mode_name(cfg.render_mode)},
        {"min_prob", cfg.min_prob}}},
      {"stages",
       {{"reproject", cfg.stages.reproject},
        {"fuse", cfg.stages.fuse},
        {"densify", cfg.stages.densify},
        {"hha", cfg.stages.hha},
        {"propose", cfg.stages.propose},
        {"combine", cfg.stages.combine},
        {"argmax", cfg.stages.argmax}}},
      {"layout",
       {{"depth_sources", cfg.layout.depth_sources},
        {"camera_sources", cfg.layout.camera_sources},
        {"rgb", cfg.layout.rgb},
        {"reference_camera", cfg.layout.reference_camera},
        {"detections", cfg.layout.detections},
        {"segmentation_prefix", cfg.layout.segmentation_prefix},
        {"depth_scale", cfg.layout.depth_scale}}},
  };
}

json PipelineSummary::to_json() const {
  json stages_json = json::array();
  for (const auto& s : stages) {
    json artifacts = json::array();
    for (const auto& a : s.artifacts) artifacts.push_back({{"path", a.path}, {"checksum", a.checksum}});
    stages_json.push_back({{"name", s.name}, {"ran", s.ran}, {"wall_ms", s.wall_ms}, {"artifacts", artifacts}});
  }
  return json{{"stages", stages_json}};
}

namespace {

std::string energy_csv(const std::vector<EnergySample>& trace) {
  std::ostringstream out;
  out << "iteration,energy\n" << std::setprecision(17);
  for (const auto& s : trace) out << s.iteration << ',' << s.energy << '\n';
  return out.str();
}

LabelMap region_image(const RegionLabeling& labeling) {
  LabelMap img(labeling.labels.width(), labeling.labels.height(), 0);
  for (std::size_t i = 0; i < img.size(); ++i) {
    const int r = labeling.labels[i];
    img[i] = r == kBackgroundRegion ? 0 : static_cast<std::uint8_t>(r % 254 + 1);
  }
  return img;
}

fs::path require_file(const fs::path& path) {
  if (!fs::exists(path)) throw InputError("missing input " + path.string());
  return path;
}

class PipelineRun {
 public:
  PipelineRun(fs::path scene_dir, fs::path out_dir, const PipelineConfig& cfg)
      : scene_(std::move(scene_dir)), out_(std::move(out_dir)), cfg_(cfg) {}

  PipelineSummary run() {
    fs::create_directories(out_);
    reference_ = load_camera(require_file(scene_ / cfg_.layout.reference_camera));
    const auto& st = cfg_.stages;
    stage("reproject", st.reproject, [&] { do_reproject(); });
    stage("fuse", st.fuse, [&] { do_fuse(); });
    stage("densify", st.densify, [&] { do_densify(); });
    stage("hha", st.hha, [&] { do_hha(); });
    stage("propose", st.propose, [&] { do_propose(); });
    stage("combine", st.combine, [&] { do_combine(); });
    stage("argmax", st.argmax, [&] { do_argmax(); });
    save_json(summary_.to_json(), out_ / "summary.json");
    return summary_;
  }

 private:
  template <typename Fn>
  void stage(const char* name, bool enabled, Fn&& body) {
    StageReport report;
    report.name = name;
    report_ = &report;
    const auto t0 = std::chrono::steady_clock::now();
    if (enabled) {
      try {
        body();
      } catch (const InputError& e) {
        throw InputError(std::string(name) + ": " + e.what());
      } catch (const ConfigError& e) {
        throw ConfigError(std::string(name) + ": " + e.what());
      } catch (const InvariantError& e) {
        throw InvariantError(std::string(name) + ": " + e.what());
      } catch (const fs::filesystem_error& e) {
        throw InputError(std::string(name) + ": " + e.what());
      } catch (const std::exception& e) {
        throw InvariantError(std::string(name) + ": " + e.what());
      }
      report.ran = true;
    }
    report.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    report_ = nullptr;
    summary_.stages.push_back(std::move(report));
  }

  void record(const std::string& rel) {
    report_->artifacts.push_back({rel, file_checksum(out_ / rel)});
  }

  /// Loads every depth source; reprojects into the reference frame when asked.
  void load_sources(bool reproject) {
    if (sources_) return;
    std::vector<DepthMap> out;
    for (std::size_t i = 0; i < cfg_.layout.depth_sources.size(); ++i) {
      DepthMap d = load_depth(require_file(scene_ / cfg_.layout.depth_sources[i]), cfg_.layout.depth_scale);
      if (reproject) {
        const CameraModel cam = load_camera(require_file(scene_ / cfg_.layout.camera_sources[i]));
        d = reproject_depth(d, cam, reference_);
      } else if (d.width() != reference_.width || d.height() != reference_.height) {
        throw InputError("depth source " + cfg_.layout.depth_sources[i] + " is " + describe_shape(d.width(), d.height()) +
                         " but the reference camera is " + describe_shape(reference_.width, reference_.height) +
                         "; enable reprojection");
      }
      out.push_back(std::move(d));
    }
    sources_ = std::move(out);
  }

  const ColorImage& rgb() {
    if (!rgb_) {
      rgb_ = load_color(require_file(scene_ / cfg_.layout.rgb));
      if (rgb_->width() != reference_.width || rgb_->height() != reference_.height) {
        throw InputError("rgb image does not match the reference camera resolution");
      }
    }
    return *rgb_;
  }

  /// Depth and weights handed to later stages: the most processed depth available.
  void ensure_depth() {
    if (depth_) return;
    load_sources(false);
    depth_ = (*sources_)[0];
    WeightMap w(depth_->width(), depth_->height(), 0.0);
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = depth_->valid(i) ? 1.0 : 0.0;
    weight_ = std::move(w);
  }

  void do_reproject() {
    load_sources(true);
    for (std::size_t i = 0; i < sources_->size(); ++i) {
      const std::string rel = "reprojected_" + std::to_string(i) + ".png";
      save_depth((*sources_)[i], out_ / rel, cfg_.layout.depth_scale);
      record(rel);
    }
  }

  void do_fuse() {
    load_sources(false);
    FusedDepth fused = fuse(*sources_, cfg_.fusion);
    save_depth(fused.depth, out_ / "fused_depth.png", cfg_.layout.depth_scale);
    record("fused_depth.png");
    save_float_map(fused.weight, out_ / "fused_weight.pfm");
    record("fused_weight.pfm");
    depth_ = std::move(fused.depth);
    weight_ = std::move(fused.weight);
  }

  void do_densify() {
    ensure_depth();
    DensifyResult result = densify(*depth_, *weight_, rgb(), cfg_.tgv);
    save_depth(result.depth, out_ / "dense_depth.png", cfg_.layout.depth_scale);
    record("dense_depth.png");
    save_text(energy_csv(result.energy_trace), out_ / "energy.csv");
    record("energy.csv");
    depth_ = std::move(result.depth);
  }

  const NormalMap& normals() {
    if (!normals_) normals_ = estimate_normals(*depth_, reference_, cfg_.normal_window);
    return *normals_;
  }

  void do_hha() {
    ensure_depth();
    const ColorImage img =
        cfg_.hha_raw3 ? encode_raw3(*depth_, cfg_.hha) : encode_hha(*depth_, reference_, normals(), cfg_.hha);
    save_color(img, out_ / "hha.png");
    record("hha.png");
  }

  void do_propose() {
    ensure_depth();
    const PointBuffer points = back_project(*depth_, reference_);
    const RegionLabeling labeling = connected_components(rgb(), points, normals(), cfg_.proposals);
    const double area = static_cast<double>(reference_.width) * reference_.height;
    save_detections(extract_boxes(labeling, cfg_.proposals, area), out_ / "proposals.json");
    record("proposals.json");
    save_labels(region_image(labeling), out_ / "regions.png");
    record("regions.png");
  }

  const ProbabilityMap& segmentation() {
    if (!seg_) {
      seg_ = load_probability_map(scene_ / cfg_.layout.segmentation_prefix);
      if (seg_->width() != reference_.width || seg_->height() != reference_.height) {
        throw InputError("segmentation planes do not match the reference camera resolution");
      }
    }
    return *seg_;
  }

  void do_combine() {
    const ProbabilityMap& seg = segmentation();
    const auto dets = load_detections(require_file(scene_ / cfg_.layout.detections), seg.num_classes());
    const ProbabilityMap p_det =
        render_detection_map(dets, seg.width(), seg.height(), seg.num_classes(), cfg_.combine, cfg_.render_mode);
    combined_ = combine(seg, p_det, cfg_.combine);
    save_probability_map(*combined_, out_ / "combined");
    for (int k = 0; k < combined_->num_classes(); ++k) record(class_plane_path("combined", k).string());
  }

  void do_argmax() {
    const ProbabilityMap& p = combined_ ? *combined_ : segmentation();
    save_labels(argmax_labels(p, cfg_.min_prob), out_ / "labels.png");
    record("labels.png");
  }

  fs::path scene_;
  fs::path out_;
  const PipelineConfig& cfg_;
  CameraModel reference_;
  StageReport* report_ = nullptr;
  PipelineSummary summary_;

  std::optional<std::vector<DepthMap>> sources_;
  std::optional<ColorImage> rgb_;
  std::optional<DepthMap> depth_;
  std::optional<WeightMap> weight_;
  std::optional<NormalMap> normals_;
  std::optional<ProbabilityMap> seg_;
  std::optional<ProbabilityMap> combined_;
};

}  // namespace

PipelineSummary run_pipeline(const fs::path& scene_dir, const fs::path& out_dir, const PipelineConfig& cfg) {
  cfg.validate();
  if (!fs::is_directory(scene_dir)) throw InputError("scene directory " + scene_dir.string() + " does not exist");
  return PipelineRun(scene_dir, out_dir, cfg).run();
}

}  // namespace binpercept
