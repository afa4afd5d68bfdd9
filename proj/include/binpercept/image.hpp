#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "binpercept/errors.hpp"

namespace binpercept {

/// Dense row-major 2-D container.
template <typename T>
class Grid {
 public:
  Grid() = default;
  Grid(int width, int height, T fill = T{})
      : width_(width), height_(height) {
    if (width < 0 || height < 0) throw InputError("negative grid dimensions");
    values_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill);
  }

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }

  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x);
  }
  bool contains(int x, int y) const { return x >= 0 && y >= 0 && x < width_ && y < height_; }

  T& at(int x, int y) { return values_[index(x, y)]; }
  const T& at(int x, int y) const { return values_[index(x, y)]; }
  T& operator[](std::size_t i) { return values_[i]; }
  const T& operator[](std::size_t i) const { return values_[i]; }

  std::span<T> values() { return values_; }
  std::span<const T> values() const { return values_; }

  template <typename U>
  bool same_shape(const Grid<U>& other) const {
    return width_ == other.width() && height_ == other.height();
  }

  bool operator==(const Grid&) const = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<T> values_;
};

using Rgb = std::array<std::uint8_t, 3>;
using ColorImage = Grid<Rgb>;
using GrayImage = Grid<double>;
using FloatImage = Grid<float>;

/// Per-pixel confidence in [0,1]; zero wherever the associated depth is invalid.
/// Held in double precision; files store it as float32.
using WeightMap = Grid<double>;

/// Per-pixel class index; kIgnoreLabel marks pixels excluded from scoring.
using LabelMap = Grid<std::uint8_t>;
inline constexpr std::uint8_t kIgnoreLabel = 255;

/// Metric depth with an explicit validity mask. Invalid pixels hold 0 and
/// never take part in arithmetic.
class DepthMap {
 public:
  DepthMap() = default;
  DepthMap(int width, int height) : depth_(width, height, 0.0), valid_(width, height, 0) {}

  int width() const { return depth_.width(); }
  int height() const { return depth_.height(); }
  std::size_t size() const { return depth_.size(); }
  bool empty() const { return depth_.empty(); }
  bool contains(int x, int y) const { return depth_.contains(x, y); }

  bool valid(int x, int y) const { return valid_.at(x, y) != 0; }
  bool valid(std::size_t i) const { return valid_[i] != 0; }
  double at(int x, int y) const { return depth_.at(x, y); }
  double operator[](std::size_t i) const { return depth_[i]; }

  void set(int x, int y, double meters) { set(depth_.index(x, y), meters); }
  void set(std::size_t i, double meters) {
    if (!(std::isfinite(meters) && meters > 0.0)) throw InvariantError("depth must be finite and positive");
    depth_[i] = meters;
    valid_[i] = 1;
  }
  void invalidate(int x, int y) { invalidate(depth_.index(x, y)); }
  void invalidate(std::size_t i) {
    depth_[i] = 0.0;
    valid_[i] = 0;
  }

  std::size_t valid_count() const {
    std::size_t n = 0;
    for (auto v : valid_.values()) n += v;
    return n;
  }

  template <typename U>
  bool same_shape(const Grid<U>& other) const { return depth_.same_shape(other); }
  bool same_shape(const DepthMap& other) const { return depth_.same_shape(other.depth_); }

  bool operator==(const DepthMap&) const = default;

 private:
  Grid<double> depth_;
  Grid<std::uint8_t> valid_;
};

/// Per-class probability planes of identical size.
class ProbabilityMap {
 public:
  ProbabilityMap() = default;
  ProbabilityMap(int width, int height, int num_classes) {
    if (num_classes < 1) throw InputError("probability map needs at least one class");
    planes_.assign(static_cast<std::size_t>(num_classes), FloatImage(width, height, 0.0f));
  }
  explicit ProbabilityMap(std::vector<FloatImage> planes);

  int width() const { return planes_.empty() ? 0 : planes_.front().width(); }
  int height() const { return planes_.empty() ? 0 : planes_.front().height(); }
  int num_classes() const { return static_cast<int>(planes_.size()); }

  FloatImage& plane(int k) { return planes_.at(static_cast<std::size_t>(k)); }
  const FloatImage& plane(int k) const { return planes_.at(static_cast<std::size_t>(k)); }

  bool same_shape(const ProbabilityMap& o) const {
    return num_classes() == o.num_classes() && width() == o.width() && height() == o.height();
  }
  bool operator==(const ProbabilityMap&) const = default;

 private:
  std::vector<FloatImage> planes_;
};

/// Axis-aligned box in pixel units; covers [x, x+w) x [y, y+h).
struct Box {
  double x = 0.0;
  double y = 0.0;
  double w = 0.0;
  double h = 0.0;

  double area() const { return w * h; }
  bool operator==(const Box&) const = default;
};

inline constexpr int kUnsetClass = -1;

struct Detection {
  int class_id = kUnsetClass;
  double confidence = 0.0;
  Box box;

  bool operator==(const Detection&) const = default;
};

/// Channel-major stack of feature maps (channels x height x width).
class FeatureMapStack {
 public:
  FeatureMapStack() = default;
  FeatureMapStack(int width, int height, int channels, float fill = 0.0f)
      : width_(width), height_(height), channels_(channels) {
    if (width < 0 || height < 0 || channels < 0) throw InputError("negative feature stack dimensions");
    values_.assign(static_cast<std::size_t>(width) * height * channels, fill);
  }

  int width() const { return width_; }
  int height() const { return height_; }
  int channels() const { return channels_; }
  std::size_t size() const { return values_.size(); }

  float& at(int c, int x, int y) { return values_[offset(c, x, y)]; }
  float at(int c, int x, int y) const { return values_[offset(c, x, y)]; }
  std::span<float> values() { return values_; }
  std::span<const float> values() const { return values_; }

  bool same_shape(const FeatureMapStack& o) const {
    return width_ == o.width_ && height_ == o.height_ && channels_ == o.channels_;
  }

 private:
  std::size_t offset(int c, int x, int y) const {
    return (static_cast<std::size_t>(c) * height_ + y) * width_ + x;
  }
  int width_ = 0;
  int height_ = 0;
  int channels_ = 0;
  std::vector<float> values_;
};

std::string describe_shape(int width, int height);

}  // namespace binpercept
