// Copyright 2026 The strec Authors
// SPDX-License-Identifier: Apache-2.0

// Thin-plate-spline rectification: a localization CNN predicts fiducial
// points on the resized input, a TPS maps the canonical rectified-plane
// layout onto them, and a bilinear sampler produces the rectified image.
//
// Coordinates are normalized to [0, 1]^2 as (x, y) with pixel centres at
// (i + 0.5) / size.

#pragma once

#include <array>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "strec/image.hpp"
#include "strec/nn.hpp"

namespace strec {

inline constexpr int kRectifierInputHeight = 64;
inline constexpr int kRectifierInputWidth = 256;
inline constexpr int kRectifiedHeight = 32;
inline constexpr int kRectifiedWidth = 100;

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

using ControlPoints = std::vector<Point2>;

// Half the points evenly spaced on y = 0.25, half on y = 0.75, with x at
// (i + 0.5) / (K / 2). K must be even and >= 4.
ControlPoints canonical_layout(int num_points);

// TPS radial kernel U(r) = r^2 log r^2, U(0) = 0.
double tps_kernel(double squared_distance);

// f(p) = a0 + ax * p.x + ay * p.y + sum_i w_i U(|p - anchor_i|^2).
// coefficients rows: w_1..w_K, a0, ax, ay; columns: x, y.
struct TpsTransform {
  ControlPoints anchors;
  Eigen::MatrixXd coefficients;

  Point2 map(Point2 p) const;
};

// Solves the TPS taking `target` (rectified plane) onto `source` (input
// image), with ridge `regularization` on the kernel block. Throws
// NumericalError when the system is singular.
TpsTransform solve_tps(const ControlPoints& source, const ControlPoints& target,
                       double regularization = 1e-6);

struct SamplingGrid {
  int height = 0;
  int width = 0;
  std::vector<double> coords;  // height * width * (x, y)

  Point2 at(int r, int c) const {
    const auto i = (static_cast<std::size_t>(r) * width + c) * 2;
    return {coords[i], coords[i + 1]};
  }
};

// grid(r, c) = transform(((c + 0.5) / width, (r + 0.5) / height)).
SamplingGrid build_sampling_grid(const TpsTransform& transform,
                                 int height = kRectifiedHeight, int width = kRectifiedWidth);
SamplingGrid identity_grid(int height = kRectifiedHeight, int width = kRectifiedWidth);

// Bilinear border-clamped sampling of one image.
Image sample(const Image& image, const SamplingGrid& grid);

Tensor grid_to_tensor(const SamplingGrid& grid, std::int64_t batch = 1);

// Differentiable TPS for a fixed target layout. The solution is linear in the
// source points, so both the coefficient solve and the grid evaluation are
// constant matrices applied to a [B, K, 2] tensor.
class TpsGridGenerator {
 public:
  TpsGridGenerator(const ControlPoints& target, int out_height, int out_width,
                   double regularization);

  // source [B, K, 2] -> coefficients [B, K + 3, 2]
  Tensor solve(const Tensor& source) const;
  // coefficients [B, K + 3, 2] -> grid [B, out_h, out_w, 2]
  Tensor grid(const Tensor& coefficients) const;
  Tensor operator()(const Tensor& source) const { return grid(solve(source)); }

  int num_points() const { return num_points_; }

 private:
  int num_points_;
  int out_height_;
  int out_width_;
  Tensor solve_matrix_;    // [K + 3, K]
  Tensor lattice_basis_;   // [out_h * out_w, K + 3]
};

struct LocalizationConfig {
  std::vector<int> channels{32, 64, 128, 256, 256, 256};
  int fc_units = 512;
  int num_points = 20;
};

// Six 3x3 conv + ReLU + 2x2 max-pool stages, FC + ReLU, FC + sigmoid.
// The last FC starts with zero weights and a bias at the logit of the
// canonical layout, so a fresh network predicts the canonical points.
class LocalizationNetwork {
 public:
  LocalizationNetwork(ParameterStore& store, const std::string& prefix, int in_channels,
                      const LocalizationConfig& config, Rng& rng);

  // x [B, C, 64, 256] -> control points [B, K, 2] in [0, 1].
  Tensor operator()(const Tensor& x) const;

 private:
  LocalizationConfig config_;
  std::vector<Conv2d> convs_;
  Linear fc1_;
  Linear fc2_;
};

struct RectifierConfig {
  bool enabled = true;
  LocalizationConfig localization;
  double regularization = 1e-6;
};

class Rectifier {
 public:
  Rectifier(ParameterStore& store, const std::string& prefix, int channels,
            const RectifierConfig& config, Rng& rng);

  // resized [B, C, 64, 256] -> rectified [B, C, 32, 100]. With rectification
  // disabled this is exactly plain_resize.
  Tensor operator()(const Tensor& resized) const;
  // Predicted fiducial points [B, K, 2]; requires rectification enabled.
  Tensor control_points(const Tensor& resized) const;

  bool enabled() const { return config_.enabled; }
  const RectifierConfig& config() const { return config_; }

  // Identity-lattice sampling of the 64x256 input down to 32x100.
  static Tensor plain_resize(const Tensor& resized);

 private:
  RectifierConfig config_;
  std::unique_ptr<LocalizationNetwork> localization_;
  std::unique_ptr<TpsGridGenerator> generator_;
};

}  // namespace strec
