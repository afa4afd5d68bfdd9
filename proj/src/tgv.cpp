#include "binpercept/tgv.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

#include "binpercept/parallel.hpp"

namespace binpercept {

void TgvConfig::validate() const {
  if (!(alpha0 > 0.0) || !(alpha1 > 0.0)) throw ConfigError("tgv alpha0 and alpha1 must be positive");
  if (!(tensor_beta >= 0.0) || !(tensor_gamma > 0.0)) throw ConfigError("tgv tensor_beta must be >= 0, tensor_gamma > 0");
  if (max_iters < 1) throw ConfigError("tgv max_iters must be >= 1");
  if (check_every < 1) throw ConfigError("tgv check_every must be >= 1");
  if (!(rel_tol > 0.0)) throw ConfigError("tgv rel_tol must be positive");
}

GrayImage to_grayscale(const ColorImage& img) {
  GrayImage out(img.width(), img.height());
  for (std::size_t i = 0; i < img.size(); ++i) {
    const Rgb& c = img[i];
    out[i] = (0.299 * c[0] + 0.587 * c[1] + 0.114 * c[2]) / 255.0;
  }
  return out;
}

void gradient(const Grid<double>& u, Grid<double>& gx, Grid<double>& gy) {
  const int w = u.width();
  const int h = u.height();
  if (!gx.same_shape(u)) gx = Grid<double>(w, h);
  if (!gy.same_shape(u)) gy = Grid<double>(w, h);
  parallel_rows(h, [&](int y) {
    for (int x = 0; x < w; ++x) {
      const double c = u.at(x, y);
      gx.at(x, y) = x + 1 < w ? u.at(x + 1, y) - c : 0.0;
      gy.at(x, y) = y + 1 < h ? u.at(x, y + 1) - c : 0.0;
    }
  });
}

void divergence(const Grid<double>& px, const Grid<double>& py, Grid<double>& out) {
  const int w = px.width();
  const int h = px.height();
  if (!py.same_shape(px)) throw InputError("divergence components differ in size");
  if (!out.same_shape(px)) out = Grid<double>(w, h);
  parallel_rows(h, [&](int y) {
    for (int x = 0; x < w; ++x) {
      double d = 0.0;
      if (x + 1 < w) d += px.at(x, y);
      if (x > 0) d -= px.at(x - 1, y);
      if (y + 1 < h) d += py.at(x, y);
      if (y > 0) d -= py.at(x, y - 1);
      out.at(x, y) = d;
    }
  });
}

namespace {

Tensor2 make_tensor(double gx, double gy, double beta, double gamma) {
  const double mag = std::hypot(gx, gy);
  if (!(mag > 0.0)) return {};
  const double nx = gx / mag;
  const double ny = gy / mag;
  const double e = std::exp(-beta * std::pow(mag, gamma));
  // e n n^T + n_perp n_perp^T with n_perp = (-ny, nx)
  return {e * nx * nx + ny * ny, (e - 1.0) * nx * ny, e * ny * ny + nx * nx};
}

bool has_data(const DepthMap& data, const WeightMap& weights, std::size_t i) {
  return data.valid(i) && weights[i] > 0.0;
}

}  // namespace

TensorField build_tensor(const ColorImage& guide, double beta, double gamma) {
  if (guide.empty()) throw InputError("guide image is empty");
  const GrayImage g = to_grayscale(guide);
  Grid<double> gx;
  Grid<double> gy;
  gradient(g, gx, gy);
  TensorField out(g.width(), g.height());
  for (std::size_t i = 0; i < g.size(); ++i) out[i] = make_tensor(gx[i], gy[i], beta, gamma);
  return out;
}

TensorField tensor_sqrt(const TensorField& tensor) {
  TensorField out(tensor.width(), tensor.height());
  for (std::size_t i = 0; i < tensor.size(); ++i) {
    const Tensor2& t = tensor[i];
    // closed-form square root of a symmetric positive-definite 2x2 matrix
    const double det = t.a * t.c - t.b * t.b;
    const double s = std::sqrt(std::max(det, 0.0));
    const double norm = std::sqrt(t.a + t.c + 2.0 * s);
    out[i] = {(t.a + s) / norm, t.b / norm, (t.c + s) / norm};
  }
  return out;
}

double tgv_energy(const Grid<double>& u, const VectorField& v, const TensorField& sqrt_tensor,
                  const DepthMap& data, const WeightMap& weights, const TgvConfig& cfg) {
  Grid<double> gx;
  Grid<double> gy;
  gradient(u, gx, gy);
  Grid<double> v1x;
  Grid<double> v1y;
  Grid<double> v2x;
  Grid<double> v2y;
  gradient(v.x, v1x, v1y);
  gradient(v.y, v2x, v2y);

  double first = 0.0;
  double second = 0.0;
  double fidelity = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    const Tensor2& t = sqrt_tensor[i];
    const double ex = gx[i] - v.x[i];
    const double ey = gy[i] - v.y[i];
    first += std::hypot(t.a * ex + t.b * ey, t.b * ex + t.c * ey);
    second += std::sqrt(v1x[i] * v1x[i] + v1y[i] * v1y[i] + v2x[i] * v2x[i] + v2y[i] * v2y[i]);
    if (has_data(data, weights, i)) {
      const double r = u[i] - data[i];
      fidelity += weights[i] * r * r;
    }
  }
  return cfg.alpha1 * first + cfg.alpha0 * second + fidelity;
}

Grid<double> nearest_fill(const DepthMap& sparse, const WeightMap& weights) {
  const int w = sparse.width();
  const int h = sparse.height();
  Grid<double> out(w, h, 0.0);
  Grid<std::uint8_t> seen(w, h, 0);
  std::deque<std::pair<int, int>> queue;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!has_data(sparse, weights, out.index(x, y))) continue;
      out.at(x, y) = sparse.at(x, y);
      seen.at(x, y) = 1;
      queue.emplace_back(x, y);
    }
  }
  constexpr int kDx[4] = {1, -1, 0, 0};
  constexpr int kDy[4] = {0, 0, 1, -1};
  while (!queue.empty()) {
    const auto [x, y] = queue.front();
    queue.pop_front();
    for (int k = 0; k < 4; ++k) {
      const int nx = x + kDx[k];
      const int ny = y + kDy[k];
      if (!out.contains(nx, ny) || seen.at(nx, ny)) continue;
      seen.at(nx, ny) = 1;
      out.at(nx, ny) = out.at(x, y);
      queue.emplace_back(nx, ny);
    }
  }
  return out;
}

namespace {

/// Chambolle-Pock iterations for
///   min_{u,v} alpha1 |A(grad u - v)| + alpha0 |grad v| + w (u - d)^2 + box(u)
/// with A = T^1/2. Dual p pairs with the first term, q with the second.
class TgvSolver {
 public:
  TgvSolver(const DepthMap& data, const WeightMap& weights, TensorField sqrt_tensor, const TgvConfig& cfg)
      : data_(data), weights_(weights), a_(std::move(sqrt_tensor)), cfg_(cfg), w_(data.width()), h_(data.height()) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (std::size_t i = 0; i < data.size(); ++i) {
      if (!has_data(data, weights, i)) continue;
      lo = std::min(lo, data[i]);
      hi = std::max(hi, data[i]);
    }
    lo_ = lo;
    hi_ = hi;

    u_ = nearest_fill(data, weights);
    v_ = {Grid<double>(w_, h_, 0.0), Grid<double>(w_, h_, 0.0)};
    ubar_ = u_;
    vbar_ = v_;
    px_ = py_ = Grid<double>(w_, h_, 0.0);
    qxx_ = qxy_ = qyx_ = qyy_ = Grid<double>(w_, h_, 0.0);
  }

  const Grid<double>& u() const { return u_; }
  const VectorField& v() const { return v_; }
  const TensorField& sqrt_tensor() const { return a_; }

  double energy() const { return tgv_energy(u_, v_, a_, data_, weights_, cfg_); }

  void step() {
    dual_step();
    primal_step();
  }

 private:
  // ||K||^2 <= 16 for K(u, v) = (A(grad u - v), grad v) since ||A|| <= 1 and ||grad||^2 <= 8.
  static constexpr double kStep = 0.99 / 4.0;

  void dual_step() {
    gradient(ubar_, gx_, gy_);
    gradient(vbar_.x, g1x_, g1y_);
    gradient(vbar_.y, g2x_, g2y_);
    const double r1 = cfg_.alpha1;
    const double r0 = cfg_.alpha0;
    parallel_rows(h_, [&](int y) {
      for (int x = 0; x < w_; ++x) {
        const std::size_t i = px_.index(x, y);
        const Tensor2& t = a_[i];
        const double ex = gx_[i] - vbar_.x[i];
        const double ey = gy_[i] - vbar_.y[i];
        const double p1 = px_[i] + kStep * (t.a * ex + t.b * ey);
        const double p2 = py_[i] + kStep * (t.b * ex + t.c * ey);
        const double pn = std::max(1.0, std::hypot(p1, p2) / r1);
        px_[i] = p1 / pn;
        py_[i] = p2 / pn;

        const double q1 = qxx_[i] + kStep * g1x_[i];
        const double q2 = qxy_[i] + kStep * g1y_[i];
        const double q3 = qyx_[i] + kStep * g2x_[i];
        const double q4 = qyy_[i] + kStep * g2y_[i];
        const double qn = std::max(1.0, std::sqrt(q1 * q1 + q2 * q2 + q3 * q3 + q4 * q4) / r0);
        qxx_[i] = q1 / qn;
        qxy_[i] = q2 / qn;
        qyx_[i] = q3 / qn;
        qyy_[i] = q4 / qn;
      }
    });
  }

  void primal_step() {
    if (!apx_.same_shape(px_)) apx_ = apy_ = Grid<double>(w_, h_);
    parallel_rows(h_, [&](int y) {
      for (int x = 0; x < w_; ++x) {
        const std::size_t i = px_.index(x, y);
        const Tensor2& t = a_[i];
        apx_[i] = t.a * px_[i] + t.b * py_[i];
        apy_[i] = t.b * px_[i] + t.c * py_[i];
      }
    });
    divergence(apx_, apy_, div_ap_);
    divergence(qxx_, qxy_, div_q1_);
    divergence(qyx_, qyy_, div_q2_);

    parallel_rows(h_, [&](int y) {
      for (int x = 0; x < w_; ++x) {
        const std::size_t i = px_.index(x, y);
        const double u_old = u_[i];
        double un = u_old + kStep * div_ap_[i];
        if (has_data(data_, weights_, i)) {
          const double tw = 2.0 * kStep * weights_[i];
          un = (un + tw * data_[i]) / (1.0 + tw);
        }
        un = std::clamp(un, lo_, hi_);
        u_[i] = un;
        ubar_[i] = 2.0 * un - u_old;

        const double vx_old = v_.x[i];
        const double vy_old = v_.y[i];
        const double vx = vx_old + kStep * (apx_[i] + div_q1_[i]);
        const double vy = vy_old + kStep * (apy_[i] + div_q2_[i]);
        v_.x[i] = vx;
        v_.y[i] = vy;
        vbar_.x[i] = 2.0 * vx - vx_old;
        vbar_.y[i] = 2.0 * vy - vy_old;
      }
    });
  }

  const DepthMap& data_;
  const WeightMap& weights_;
  TensorField a_;
  TgvConfig cfg_;
  int w_;
  int h_;
  double lo_ = 0.0;
  double hi_ = 0.0;

  Grid<double> u_;
  Grid<double> ubar_;
  VectorField v_;
  VectorField vbar_;
  Grid<double> px_, py_;
  Grid<double> qxx_, qxy_, qyx_, qyy_;

  Grid<double> gx_, gy_, g1x_, g1y_, g2x_, g2y_;
  Grid<double> apx_, apy_, div_ap_, div_q1_, div_q2_;
};

}  // namespace

DensifyResult densify(const DepthMap& sparse, const WeightMap& weights, const ColorImage& guide,
                      const TgvConfig& cfg) {
  cfg.validate();
  if (sparse.empty()) throw InputError("densify: empty depth map");
  if (!sparse.same_shape(weights) || !sparse.same_shape(guide)) {
    throw InputError("densify: depth " + describe_shape(sparse.width(), sparse.height()) + ", weights " +
                     describe_shape(weights.width(), weights.height()) + " and guide " +
                     describe_shape(guide.width(), guide.height()) + " must match");
  }
  bool any = false;
  for (std::size_t i = 0; i < sparse.size(); ++i) {
    if (!(weights[i] >= 0.0 && weights[i] <= 1.0)) throw InputError("densify: weights must lie in [0,1]");
    any = any || has_data(sparse, weights, i);
  }
  if (!any) throw InputError("densify: weight map has no positive weight on a valid depth pixel");

  TgvSolver solver(sparse, weights, tensor_sqrt(build_tensor(guide, cfg.tensor_beta, cfg.tensor_gamma)), cfg);

  // Primal-dual iterates do not decrease the energy monotonically, so the
  // lowest-energy checkpoint is the one returned.
  DensifyResult result;
  double best = solver.energy();
  double last_checked = best;
  Grid<double> best_u = solver.u();
  VectorField best_v = solver.v();
  result.energy_trace.push_back({0, best});

  int it = 0;
  while (it < cfg.max_iters) {
    solver.step();
    ++it;
    if (it % cfg.check_every != 0 && it != cfg.max_iters) continue;
    const double e = solver.energy();
    if (!std::isfinite(e)) throw InvariantError("densify: energy became non-finite");
    if (e < best) {
      best = e;
      best_u = solver.u();
      best_v = solver.v();
    }
    result.energy_trace.push_back({it, best});
    const double change = std::abs(last_checked - e) / std::max(std::abs(last_checked), 1e-300);
    last_checked = e;
    if (change < cfg.rel_tol) break;
  }
  result.iterations_run = it;

  result.depth = DepthMap(sparse.width(), sparse.height());
  for (std::size_t i = 0; i < best_u.size(); ++i) result.depth.set(i, best_u[i]);
  result.auxiliary = std::move(best_v);
  return result;
}

}  // namespace binpercept
