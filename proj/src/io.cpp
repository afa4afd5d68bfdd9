#include "binpercept/io.hpp"

#include <png.h>
#include <zlib.h>

#include <bit>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <memory>
#include <sstream>

namespace binpercept {

namespace {

static_assert(std::endian::native == std::endian::little, "PFM and PNG byte handling assumes a little-endian host");

using File = std::unique_ptr<std::FILE, decltype(&std::fclose)>;

File open_file(const fs::path& path, const char* mode) {
  File f(std::fopen(path.c_str(), mode), &std::fclose);
  if (!f) {
    throw InputError(std::string(mode[0] == 'r' ? "cannot open " : "cannot write ") + path.string());
  }
  return f;
}

enum class PngFormat { kGray8, kGray16, kRgb8 };

struct PngImage {
  int width = 0;
  int height = 0;
  PngFormat format = PngFormat::kGray8;
  std::vector<unsigned char> bytes;  // tightly packed rows
};

int channels_of(PngFormat f) { return f == PngFormat::kRgb8 ? 3 : 1; }
int bytes_per_sample(PngFormat f) { return f == PngFormat::kGray16 ? 2 : 1; }

class PngReadHandle {
 public:
  PngReadHandle() {
    png_ = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (png_ != nullptr) info_ = png_create_info_struct(png_);
  }
  ~PngReadHandle() { png_destroy_read_struct(&png_, &info_, nullptr); }
  PngReadHandle(const PngReadHandle&) = delete;
  PngReadHandle& operator=(const PngReadHandle&) = delete;
  png_structp png() const { return png_; }
  png_infop info() const { return info_; }

 private:
  png_structp png_ = nullptr;
  png_infop info_ = nullptr;
};

class PngWriteHandle {
 public:
  PngWriteHandle() {
    png_ = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (png_ != nullptr) info_ = png_create_info_struct(png_);
  }
  ~PngWriteHandle() { png_destroy_write_struct(&png_, &info_); }
  PngWriteHandle(const PngWriteHandle&) = delete;
  PngWriteHandle& operator=(const PngWriteHandle&) = delete;
  png_structp png() const { return png_; }
  png_infop info() const { return info_; }

 private:
  png_structp png_ = nullptr;
  png_infop info_ = nullptr;
};

PngImage read_png(const fs::path& path, PngFormat want) {
  File file = open_file(path, "rb");
  PngReadHandle h;
  if (h.info() == nullptr) throw InputError("libpng initialisation failed");
  PngImage img;
  img.format = want;
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(h.png()))) {
    throw InputError("corrupt PNG: " + path.string());
  }
  png_init_io(h.png(), file.get());
  png_read_info(h.png(), h.info());
  const int bit_depth = png_get_bit_depth(h.png(), h.info());
  const int color = png_get_color_type(h.png(), h.info());
  const bool gray = color == PNG_COLOR_TYPE_GRAY;

  switch (want) {
    case PngFormat::kGray16:
      if (!gray || bit_depth != 16) {
        throw InputError(path.string() + ": expected 16-bit single-channel PNG, got bit depth " +
                         std::to_string(bit_depth));
      }
      png_set_swap(h.png());
      break;
    case PngFormat::kGray8:
      if (!gray || bit_depth != 8) {
        throw InputError(path.string() + ": expected 8-bit grayscale PNG, got bit depth " + std::to_string(bit_depth));
      }
      break;
    case PngFormat::kRgb8:
      if (bit_depth == 16) png_set_strip_16(h.png());
      if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(h.png());
      if (gray || color == PNG_COLOR_TYPE_GRAY_ALPHA) {
        if (bit_depth < 8) png_set_expand_gray_1_2_4_to_8(h.png());
        png_set_gray_to_rgb(h.png());
      }
      if ((color & PNG_COLOR_MASK_ALPHA) != 0) png_set_strip_alpha(h.png());
      break;
  }
  png_read_update_info(h.png(), h.info());

  img.width = static_cast<int>(png_get_image_width(h.png(), h.info()));
  img.height = static_cast<int>(png_get_image_height(h.png(), h.info()));
  const std::size_t stride = png_get_rowbytes(h.png(), h.info());
  const std::size_t expected = static_cast<std::size_t>(img.width) * channels_of(want) * bytes_per_sample(want);
  if (stride != expected) throw InputError(path.string() + ": unexpected PNG row layout");
  img.bytes.resize(stride * static_cast<std::size_t>(img.height));
  rows.resize(static_cast<std::size_t>(img.height));
  for (int y = 0; y < img.height; ++y) rows[static_cast<std::size_t>(y)] = img.bytes.data() + stride * y;
  png_read_image(h.png(), rows.data());
  png_read_end(h.png(), nullptr);
  return img;
}

void write_png(const PngImage& img, const fs::path& path) {
  if (img.width <= 0 || img.height <= 0) throw InputError("cannot write empty image to " + path.string());
  File file = open_file(path, "wb");
  PngWriteHandle h;
  if (h.info() == nullptr) throw InputError("libpng initialisation failed");
  std::vector<png_bytep> rows(static_cast<std::size_t>(img.height));
  const std::size_t stride = static_cast<std::size_t>(img.width) * channels_of(img.format) * bytes_per_sample(img.format);
  for (int y = 0; y < img.height; ++y) {
    rows[static_cast<std::size_t>(y)] = const_cast<png_bytep>(img.bytes.data() + stride * y);
  }
  if (setjmp(png_jmpbuf(h.png()))) {
    throw InputError("failed writing PNG " + path.string());
  }
  png_init_io(h.png(), file.get());
  png_set_compression_level(h.png(), 6);
  png_set_IHDR(h.png(), h.info(), static_cast<png_uint_32>(img.width), static_cast<png_uint_32>(img.height),
               bytes_per_sample(img.format) * 8, img.format == PngFormat::kRgb8 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(h.png(), h.info());
  if (img.format == PngFormat::kGray16) png_set_swap(h.png());
  png_write_image(h.png(), rows.data());
  png_write_end(h.png(), nullptr);
}

void ensure_parent(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
}

}  // namespace

DepthMap load_depth(const fs::path& path, double scale) {
  if (!(scale > 0.0)) throw InputError("depth scale must be positive");
  const PngImage img = read_png(path, PngFormat::kGray16);
  DepthMap out(img.width, img.height);
  for (std::size_t i = 0; i < out.size(); ++i) {
    std::uint16_t raw = 0;
    std::memcpy(&raw, img.bytes.data() + 2 * i, 2);
    if (raw != 0) out.set(i, raw * scale);
  }
  return out;
}

void save_depth(const DepthMap& depth, const fs::path& path, double scale) {
  if (!(scale > 0.0)) throw InputError("depth scale must be positive");
  PngImage img{depth.width(), depth.height(), PngFormat::kGray16, {}};
  img.bytes.assign(depth.size() * 2, 0);
  for (std::size_t i = 0; i < depth.size(); ++i) {
    if (!depth.valid(i)) continue;
    const double units = std::round(depth[i] / scale);
    if (units > 65535.0) throw InputError("depth " + std::to_string(depth[i]) + " m exceeds the 16-bit range");
    const auto raw = static_cast<std::uint16_t>(std::max(units, 1.0));
    std::memcpy(img.bytes.data() + 2 * i, &raw, 2);
  }
  ensure_parent(path);
  write_png(img, path);
}

ColorImage load_color(const fs::path& path) {
  const PngImage img = read_png(path, PngFormat::kRgb8);
  ColorImage out(img.width, img.height);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = {img.bytes[3 * i], img.bytes[3 * i + 1], img.bytes[3 * i + 2]};
  return out;
}

void save_color(const ColorImage& img, const fs::path& path) {
  PngImage png{img.width(), img.height(), PngFormat::kRgb8, {}};
  png.bytes.resize(img.size() * 3);
  for (std::size_t i = 0; i < img.size(); ++i) std::memcpy(png.bytes.data() + 3 * i, img[i].data(), 3);
  ensure_parent(path);
  write_png(png, path);
}

LabelMap load_labels(const fs::path& path, int num_classes) {
  const PngImage img = read_png(path, PngFormat::kGray8);
  LabelMap out(img.width, img.height);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const std::uint8_t v = img.bytes[i];
    if (v != kIgnoreLabel && v >= num_classes) {
      throw InputError(path.string() + ": label " + std::to_string(v) + " at pixel " + std::to_string(i) +
                       " exceeds class count " + std::to_string(num_classes));
    }
    out[i] = v;
  }
  return out;
}

void save_labels(const LabelMap& labels, const fs::path& path) {
  PngImage png{labels.width(), labels.height(), PngFormat::kGray8, {}};
  png.bytes.assign(labels.values().begin(), labels.values().end());
  ensure_parent(path);
  write_png(png, path);
}

FloatImage load_float_map(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  std::string magic;
  int width = 0;
  int height = 0;
  double scale = 0.0;
  in >> magic >> width >> height >> scale;
  if (!in || magic != "Pf") throw InputError(path.string() + ": not a single-channel PFM");
  if (width <= 0 || height <= 0) throw InputError(path.string() + ": PFM has empty dimensions");
  if (scale == 0.0) throw InputError(path.string() + ": PFM scale must be non-zero");
  in.get();  // single whitespace byte before the payload

  FloatImage out(width, height);
  std::vector<std::uint32_t> row(static_cast<std::size_t>(width));
  // PFM rows run bottom to top.
  for (int y = height - 1; y >= 0; --y) {
    in.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(row.size() * 4));
    if (!in) throw InputError(path.string() + ": truncated PFM payload");
    for (int x = 0; x < width; ++x) {
      std::uint32_t bits = row[static_cast<std::size_t>(x)];
      if (scale > 0.0) bits = __builtin_bswap32(bits);
      out.at(x, y) = std::bit_cast<float>(bits);
    }
  }
  return out;
}

void save_float_map(const FloatImage& map, const fs::path& path) {
  if (map.empty()) throw InputError("cannot write empty float map to " + path.string());
  ensure_parent(path);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path.string());
  out << "Pf\n" << map.width() << ' ' << map.height() << "\n-1.0\n";
  for (int y = map.height() - 1; y >= 0; --y) {
    out.write(reinterpret_cast<const char*>(&map.at(0, y)), static_cast<std::streamsize>(map.width() * sizeof(float)));
  }
  if (!out) throw InputError("failed writing " + path.string());
}

void save_float_map(const Grid<double>& map, const fs::path& path) {
  FloatImage narrow(map.width(), map.height());
  for (std::size_t i = 0; i < map.size(); ++i) narrow[i] = static_cast<float>(map[i]);
  save_float_map(narrow, path);
}

WeightMap load_weight_map(const fs::path& path) {
  const FloatImage f = load_float_map(path);
  WeightMap out(f.width(), f.height());
  for (std::size_t i = 0; i < f.size(); ++i) {
    if (!(f[i] >= 0.0f && f[i] <= 1.0f)) throw InputError(path.string() + ": weight outside [0,1]");
    out[i] = f[i];
  }
  return out;
}

fs::path class_plane_path(const fs::path& prefix, int k) {
  fs::path p = prefix;
  p += "_c" + std::to_string(k) + ".pfm";
  return p;
}

void save_probability_map(const ProbabilityMap& map, const fs::path& prefix) {
  for (int k = 0; k < map.num_classes(); ++k) save_float_map(map.plane(k), class_plane_path(prefix, k));
}

ProbabilityMap load_probability_map(const fs::path& prefix, std::optional<int> num_classes) {
  std::vector<FloatImage> planes;
  for (int k = 0;; ++k) {
    const fs::path p = class_plane_path(prefix, k);
    if (num_classes ? k >= *num_classes : !fs::exists(p)) break;
    if (!fs::exists(p)) throw InputError("missing probability plane " + p.string());
    planes.push_back(load_float_map(p));
    for (float v : planes.back().values()) {
      if (!(v >= 0.0f && v <= 1.0f)) throw InputError(p.string() + ": probability outside [0,1]");
    }
  }
  if (planes.empty()) throw InputError("missing probability plane " + class_plane_path(prefix, 0).string());
  return ProbabilityMap(std::move(planes));
}

std::vector<Detection> detections_from_json(const nlohmann::json& j, std::optional<int> num_classes) {
  if (!j.is_array()) throw InputError("detections must be a JSON array");
  std::vector<Detection> out;
  out.reserve(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) {
    const auto& r = j[i];
    const std::string where = "detection record " + std::to_string(i);
    if (!r.is_object() || !r.contains("class_id") || !r.contains("confidence") || !r.contains("bbox")) {
      throw InputError(where + ": expected {class_id, confidence, bbox}");
    }
    const auto& b = r.at("bbox");
    if (!r.at("class_id").is_number_integer() || !r.at("confidence").is_number() || !b.is_array() || b.size() != 4) {
      throw InputError(where + ": malformed fields");
    }
    for (const auto& v : b) {
      if (!v.is_number()) throw InputError(where + ": bbox entries must be numbers");
    }
    Detection d;
    d.class_id = r.at("class_id").get<int>();
    d.confidence = r.at("confidence").get<double>();
    d.box = {b[0].get<double>(), b[1].get<double>(), b[2].get<double>(), b[3].get<double>()};
    if (!(d.box.w > 0.0 && d.box.h > 0.0)) throw InputError(where + ": bbox width and height must be positive");
    if (d.class_id < kUnsetClass || (num_classes && d.class_id >= *num_classes)) {
      throw InputError(where + ": class_id " + std::to_string(d.class_id) + " out of range");
    }
    out.push_back(d);
  }
  return out;
}

nlohmann::json detections_to_json(const std::vector<Detection>& dets) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& d : dets) {
    j.push_back({{"class_id", d.class_id}, {"confidence", d.confidence}, {"bbox", {d.box.x, d.box.y, d.box.w, d.box.h}}});
  }
  return j;
}

std::vector<Detection> load_detections(const fs::path& path, std::optional<int> num_classes) {
  try {
    return detections_from_json(load_json(path), num_classes);
  } catch (const InputError& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

void save_detections(const std::vector<Detection>& dets, const fs::path& path) {
  save_json(detections_to_json(dets), path);
}

CameraModel camera_from_json(const nlohmann::json& j) {
  try {
    CameraModel cam;
    cam.fx = j.at("fx").get<double>();
    cam.fy = j.at("fy").get<double>();
    cam.cx = j.at("cx").get<double>();
    cam.cy = j.at("cy").get<double>();
    cam.width = j.at("width").get<int>();
    cam.height = j.at("height").get<int>();
    if (j.contains("pose")) {
      const auto& p = j.at("pose");
      if (!p.is_array() || p.size() != 16) throw InputError("camera pose must hold 16 numbers");
      Eigen::Matrix4d m;
      for (int r = 0; r < 4; ++r) {
        for (int c = 0; c < 4; ++c) m(r, c) = p[static_cast<std::size_t>(4 * r + c)].get<double>();
      }
      if ((m.row(3) - Eigen::RowVector4d(0, 0, 0, 1)).cwiseAbs().maxCoeff() > 1e-9) {
        throw InputError("camera pose last row must be 0 0 0 1");
      }
      cam.pose.matrix() = m;
    }
    cam.validate();
    return cam;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("malformed camera JSON: ") + e.what());
  }
}

nlohmann::json camera_to_json(const CameraModel& cam) {
  nlohmann::json pose = nlohmann::json::array();
  const Eigen::Matrix4d m = cam.pose.matrix();
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 4; ++c) pose.push_back(m(r, c));
  }
  return {{"fx", cam.fx}, {"fy", cam.fy}, {"cx", cam.cx}, {"cy", cam.cy},
          {"width", cam.width}, {"height", cam.height}, {"pose", pose}};
}

CameraModel load_camera(const fs::path& path) {
  try {
    return camera_from_json(load_json(path));
  } catch (const InputError& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

void save_camera(const CameraModel& cam, const fs::path& path) { save_json(camera_to_json(cam), path); }

GroundTruthScene ground_truth_from_json(const nlohmann::json& j) {
  try {
    GroundTruthScene gt;
    if (j.contains("id")) gt.id = j.at("id").get<std::string>();
    const auto& boxes = j.at("boxes");
    for (std::size_t i = 0; i < boxes.size(); ++i) {
      const auto& b = boxes[i].at("bbox");
      if (!b.is_array() || b.size() != 4) throw InputError("ground truth box " + std::to_string(i) + ": bbox needs 4 numbers");
      gt.boxes.push_back({boxes[i].at("class_id").get<int>(),
                          Box{b[0].get<double>(), b[1].get<double>(), b[2].get<double>(), b[3].get<double>()}});
    }
    if (j.contains("candidate_classes")) {
      for (const auto& c : j.at("candidate_classes")) gt.candidate_classes.insert(c.get<int>());
    } else {
      for (const auto& b : gt.boxes) gt.candidate_classes.insert(b.class_id);
    }
    gt.validate();
    return gt;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("malformed ground truth JSON: ") + e.what());
  }
}

nlohmann::json ground_truth_to_json(const GroundTruthScene& gt) {
  nlohmann::json boxes = nlohmann::json::array();
  for (const auto& b : gt.boxes) {
    boxes.push_back({{"class_id", b.class_id}, {"bbox", {b.box.x, b.box.y, b.box.w, b.box.h}}});
  }
  return {{"id", gt.id}, {"boxes", boxes}, {"candidate_classes", gt.candidate_classes}};
}

nlohmann::json load_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

void save_json(const nlohmann::json& j, const fs::path& path) { save_text(j.dump(2) + "\n", path); }

void save_text(const std::string& text, const fs::path& path) {
  ensure_parent(path);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path.string());
  out << text;
  if (!out) throw InputError("failed writing " + path.string());
}

std::string file_checksum(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  uLong crc = crc32(0L, Z_NULL, 0);
  std::vector<char> buf(1 << 16);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    const auto got = in.gcount();
    if (got > 0) crc = crc32(crc, reinterpret_cast<const Bytef*>(buf.data()), static_cast<uInt>(got));
  }
  std::ostringstream hex;
  hex << std::hex << std::setw(8) << std::setfill('0') << crc;
  return hex.str();
}

}  // namespace binpercept
