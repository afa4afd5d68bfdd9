#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>

#include <unistd.h>

#include "binpercept/camera.hpp"
#include "binpercept/image.hpp"

namespace binpercept::testing {

/// Scratch directory removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("binpercept_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& rel) const { return path_ / rel; }

 private:
  std::filesystem::path path_;
};

inline CameraModel test_camera(int w = 64, int h = 48, double f = 60.0) {
  CameraModel cam;
  cam.fx = f;
  cam.fy = f;
  cam.cx = (w - 1) / 2.0;
  cam.cy = (h - 1) / 2.0;
  cam.width = w;
  cam.height = h;
  return cam;
}

inline DepthMap constant_depth(int w, int h, double z) {
  DepthMap d(w, h);
  for (std::size_t i = 0; i < d.size(); ++i) d.set(i, z);
  return d;
}

inline ColorImage constant_color(int w, int h, Rgb c) { return ColorImage(w, h, c); }

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline int uniform_int(std::mt19937_64& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

}  // namespace binpercept::testing
