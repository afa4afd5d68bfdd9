#pragma once

#include <vector>

#include "binpercept/image.hpp"

namespace binpercept {

struct TgvConfig {
  double alpha0 = 2.0;  // weight of the second-order term |grad v|
  double alpha1 = 1.0;  // weight of the first-order term |T^1/2 (grad u - v)|
  double tensor_beta = 9.0;
  double tensor_gamma = 0.85;
  int max_iters = 1000;
  int check_every = 50;
  double rel_tol = 1e-4;

  void validate() const;
};

/// Symmetric 2x2 tensor [[a, b], [b, c]].
struct Tensor2 {
  double a = 1.0;
  double b = 0.0;
  double c = 1.0;
};
using TensorField = Grid<Tensor2>;

struct EnergySample {
  int iteration = 0;
  double energy = 0.0;
};

struct VectorField {
  Grid<double> x;
  Grid<double> y;
};

struct DensifyResult {
  DepthMap depth;                          // dense
  VectorField auxiliary;                   // the field v paired with depth
  std::vector<EnergySample> energy_trace;  // starts with the initialization
  int iterations_run = 0;
};

/// Rec.601 luma scaled to [0,1].
GrayImage to_grayscale(const ColorImage& img);

/// Anisotropic diffusion tensor exp(-beta |grad g|^gamma) n n^T + n_perp n_perp^T
/// of the grayscale guide g; identity where the gradient vanishes.
TensorField build_tensor(const ColorImage& guide, double beta, double gamma);
TensorField tensor_sqrt(const TensorField& tensor);

/// Forward differences with Neumann boundary, and the matching negative adjoint.
void gradient(const Grid<double>& u, Grid<double>& gx, Grid<double>& gy);
void divergence(const Grid<double>& px, const Grid<double>& py, Grid<double>& out);

/// alpha1 sum |T^1/2 (grad u - v)| + alpha0 sum |grad v|_F + sum w (u - d)^2,
/// data terms only where `data` is valid and weight > 0.
double tgv_energy(const Grid<double>& u, const VectorField& v, const TensorField& sqrt_tensor,
                  const DepthMap& data, const WeightMap& weights, const TgvConfig& cfg);

/// Fills sparse depth by minimizing the guided TGV-2 energy with a
/// first-order primal-dual scheme.
DensifyResult densify(const DepthMap& sparse, const WeightMap& weights, const ColorImage& guide,
                      const TgvConfig& cfg);

/// Nearest valid pixel (breadth-first, 4-neighborhood) for every pixel.
Grid<double> nearest_fill(const DepthMap& sparse, const WeightMap& weights);

}  // namespace binpercept
