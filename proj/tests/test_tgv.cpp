#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "binpercept/tgv.hpp"
#include "test_support.hpp"

using namespace binpercept;
using binpercept::testing::uniform;

namespace {

WeightMap unit_weights(const DepthMap& d) {
  WeightMap w(d.width(), d.height(), 0.0);
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = d.valid(i) ? 1.0 : 0.0;
  return w;
}

std::pair<double, double> eigenvalues(const Tensor2& t) {
  const double mean = 0.5 * (t.a + t.c);
  const double r = std::sqrt(0.25 * (t.a - t.c) * (t.a - t.c) + t.b * t.b);
  return {mean - r, mean + r};
}

DepthMap sample(std::mt19937_64& rng, int w, int h, double frac, auto&& depth_at) {
  DepthMap d(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (uniform(rng, 0.0, 1.0) < frac) d.set(x, y, depth_at(x, y));
    }
  }
  return d;
}

}  // namespace

TEST(Grayscale, LumaCoefficients) {
  ColorImage img(3, 1);
  img.at(0, 0) = {255, 255, 255};
  img.at(1, 0) = {0, 0, 0};
  img.at(2, 0) = {255, 0, 0};
  const GrayImage g = to_grayscale(img);
  EXPECT_NEAR(g.at(0, 0), 1.0, 1e-12);
  EXPECT_EQ(g.at(1, 0), 0.0);
  EXPECT_NEAR(g.at(2, 0), 0.299, 1e-12);
}

TEST(Operators, GradientOfRampAndNeumannBorder) {
  Grid<double> u(4, 3);
  for (int y = 0; y < 3; ++y) {
    for (int x = 0; x < 4; ++x) u.at(x, y) = 2.0 * x + 5.0 * y;
  }
  Grid<double> gx, gy;
  gradient(u, gx, gy);
  EXPECT_EQ(gx.at(0, 0), 2.0);
  EXPECT_EQ(gx.at(3, 1), 0.0);
  EXPECT_EQ(gy.at(1, 1), 5.0);
  EXPECT_EQ(gy.at(1, 2), 0.0);
}

TEST(Operators, DivergenceIsNegativeAdjoint) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 5; ++trial) {
    const int w = binpercept::testing::uniform_int(rng, 1, 40);
    const int h = binpercept::testing::uniform_int(rng, 1, 40);
    Grid<double> u(w, h), px(w, h), py(w, h);
    for (std::size_t i = 0; i < u.size(); ++i) {
      u[i] = uniform(rng, -1, 1);
      px[i] = uniform(rng, -1, 1);
      py[i] = uniform(rng, -1, 1);
    }
    Grid<double> gx, gy, div;
    gradient(u, gx, gy);
    divergence(px, py, div);
    double lhs = 0.0;
    double rhs = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
      lhs += gx[i] * px[i] + gy[i] * py[i];
      rhs += u[i] * div[i];
    }
    EXPECT_LT(std::abs(lhs + rhs), 1e-10);
  }
}

TEST(Tensor, ConstantGuideGivesIdentity) {
  const TensorField t = build_tensor(ColorImage(8, 6, Rgb{90, 30, 200}), 9.0, 0.85);
  for (const auto& v : t.values()) {
    EXPECT_EQ(v.a, 1.0);
    EXPECT_EQ(v.b, 0.0);
    EXPECT_EQ(v.c, 1.0);
  }
}

TEST(Tensor, VerticalEdgeDampsAcrossDirection) {
  ColorImage guide(10, 4, Rgb{0, 0, 0});
  for (int y = 0; y < 4; ++y) {
    for (int x = 5; x < 10; ++x) guide.at(x, y) = {255, 255, 255};
  }
  const TensorField t = build_tensor(guide, 9.0, 0.85);
  const Tensor2& edge = t.at(4, 1);
  EXPECT_NEAR(edge.b, 0.0, 1e-12);
  EXPECT_LT(edge.a, edge.c);  // across the edge (x) weaker than along it (y)
  EXPECT_NEAR(edge.a, std::exp(-9.0), 1e-12);
  EXPECT_NEAR(edge.c, 1.0, 1e-12);
}

TEST(Tensor, RandomGuidesGiveUnitBoundedSpdTensors) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    ColorImage guide(16, 12);
    for (auto& px : guide.values()) px = {std::uint8_t(rng()), std::uint8_t(rng()), std::uint8_t(rng())};
    const TensorField t = build_tensor(guide, uniform(rng, 0.5, 20.0), uniform(rng, 0.3, 1.5));
    const TensorField s = tensor_sqrt(t);
    for (std::size_t i = 0; i < t.size(); ++i) {
      const auto [lo, hi] = eigenvalues(t[i]);
      EXPECT_GT(lo, 0.0);
      EXPECT_LE(hi, 1.0 + 1e-12);
      // Square of the root reproduces the tensor.
      const Tensor2& r = s[i];
      EXPECT_NEAR(r.a * r.a + r.b * r.b, t[i].a, 1e-12);
      EXPECT_NEAR(r.a * r.b + r.b * r.c, t[i].b, 1e-12);
      EXPECT_NEAR(r.b * r.b + r.c * r.c, t[i].c, 1e-12);
    }
  }
}

TEST(NearestFill, FillsFromClosestSample) {
  DepthMap d(5, 1);
  d.set(0, 0, 1.0);
  d.set(4, 0, 2.0);
  WeightMap w(5, 1, 0.0);
  w.at(0, 0) = 1.0;
  w.at(4, 0) = 1.0;
  const Grid<double> u = nearest_fill(d, w);
  EXPECT_EQ(u.at(1, 0), 1.0);
  EXPECT_EQ(u.at(3, 0), 2.0);
  w.at(4, 0) = 0.0;  // zero weight counts as missing
  EXPECT_EQ(nearest_fill(d, w).at(4, 0), 1.0);
}

TEST(Densify, ConstantDepthIsReproduced) {
  std::mt19937_64 rng(2);
  const DepthMap d = sample(rng, 80, 60, 0.1, [](int, int) { return 1.0; });
  const DensifyResult r = densify(d, unit_weights(d), ColorImage(80, 60, Rgb{128, 128, 128}), TgvConfig{});
  for (std::size_t i = 0; i < r.depth.size(); ++i) {
    ASSERT_TRUE(r.depth.valid(i));
    EXPECT_NEAR(r.depth[i], 1.0, 1e-3);
  }
}

TEST(Densify, DenseDataDominatesWeakRegularizer) {
  std::mt19937_64 rng(4);
  const DepthMap d = sample(rng, 40, 30, 1.1, [&](int, int) { return uniform(rng, 0.8, 1.2); });
  TgvConfig cfg;
  cfg.alpha0 = 2e-4;
  cfg.alpha1 = 1e-4;
  const DensifyResult r = densify(d, unit_weights(d), ColorImage(40, 30, Rgb{10, 20, 30}), cfg);
  for (std::size_t i = 0; i < d.size(); ++i) EXPECT_NEAR(r.depth[i], d[i], 1e-3);
}

TEST(Densify, TraceIsMonotoneAndRunsAreIdentical) {
  std::mt19937_64 rng(6);
  const DepthMap d = sample(rng, 64, 48, 0.1, [](int x, int y) { return 1.0 + 0.01 * x + 0.002 * y; });
  ColorImage guide(64, 48, Rgb{50, 50, 50});
  for (int y = 0; y < 48; ++y) {
    for (int x = 32; x < 64; ++x) guide.at(x, y) = {200, 200, 200};
  }
  TgvConfig cfg;
  cfg.max_iters = 300;
  const DensifyResult a = densify(d, unit_weights(d), guide, cfg);
  const DensifyResult b = densify(d, unit_weights(d), guide, cfg);
  ASSERT_GE(a.energy_trace.size(), 2u);
  EXPECT_EQ(a.energy_trace.front().iteration, 0);
  for (std::size_t k = 1; k < a.energy_trace.size(); ++k) {
    EXPECT_LE(a.energy_trace[k].energy, a.energy_trace[k - 1].energy + 1e-8);
  }
  EXPECT_EQ(a.depth, b.depth);
  EXPECT_EQ(a.iterations_run, b.iterations_run);
  // The returned pair (u, v) is the iterate whose energy the trace ends on.
  Grid<double> u(64, 48);
  for (std::size_t i = 0; i < u.size(); ++i) u[i] = a.depth[i];
  const TensorField sqrt_t = tensor_sqrt(build_tensor(guide, cfg.tensor_beta, cfg.tensor_gamma));
  const double final_energy = tgv_energy(u, a.auxiliary, sqrt_t, d, unit_weights(d), cfg);
  EXPECT_NEAR(final_energy, a.energy_trace.back().energy, 1e-9 * std::max(1.0, final_energy));
}

TEST(Densify, Preconditions) {
  DepthMap d(4, 4);
  WeightMap w(4, 4, 0.0);
  const ColorImage guide(4, 4, Rgb{0, 0, 0});
  EXPECT_THROW(densify(d, w, guide, TgvConfig{}), InputError);
  d.set(1, 1, 1.0);
  w.at(1, 1) = 1.5;
  EXPECT_THROW(densify(d, w, guide, TgvConfig{}), InputError);
  w.at(1, 1) = 1.0;
  EXPECT_THROW(densify(d, w, ColorImage(3, 4), TgvConfig{}), InputError);
  TgvConfig bad;
  bad.alpha0 = 0.0;
  EXPECT_THROW(densify(d, w, guide, bad), ConfigError);
}
