// Copyright 2026 The strec Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <string>
#include <functional>
#include <vector>

#include "strec/model.hpp"
#include "strec/ops.hpp"
#include "strec/random.hpp"
#include "strec/tensor.hpp"

namespace strec::testing {

inline Tensor random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  std::vector<double> v(static_cast<std::size_t>(shape_numel(shape)));
  for (double& x : v) x = rng.uniform(lo, hi);
  return Tensor::from_vector(std::move(shape), std::move(v));
}

inline Tensor leaf(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t = random_tensor(std::move(shape), rng, lo, hi);
  t.set_requires_grad(true);
  return t;
}

// ||analytic - numeric|| / max(||analytic||, ||numeric||) for the gradient of
// the scalar f with respect to x, by central differences.
inline double gradient_error(const std::function<Tensor()>& f, Tensor x, double h = 1e-6) {
  x.zero_grad();
  Tensor y = f();
  y.backward();
  const std::vector<double> analytic(x.grad().begin(), x.grad().end());
  std::vector<double> numeric(analytic.size());
  auto values = x.mutable_data();
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double keep = values[i];
    values[i] = keep + h;
    const double up = f().item();
    values[i] = keep - h;
    const double down = f().item();
    values[i] = keep;
    numeric[i] = (up - down) / (2.0 * h);
  }
  double diff = 0.0, na = 0.0, nn = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    diff += (analytic[i] - numeric[i]) * (analytic[i] - numeric[i]);
    na += analytic[i] * analytic[i];
    nn += numeric[i] * numeric[i];
  }
  return std::sqrt(diff) / std::max({std::sqrt(na), std::sqrt(nn), 1e-12});
}

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

// A model small enough for unit tests.
inline ModelConfig tiny_model(int channels = 1) {
  ModelConfig m;
  m.channels = channels;
  m.rectifier.localization.channels = {2, 2, 4, 4, 4, 4};
  m.rectifier.localization.fc_units = 8;
  m.rectifier.localization.num_points = 4;
  m.backbone.stem_channels = 4;
  m.backbone.block_channels = {4, 4, 8, 8, 8};
  m.backbone.units_per_block = 1;
  m.attention.d_model = 8;
  m.attention.heads = 2;
  m.attention.d_ff = 16;
  m.attention.encoder_layers = 1;
  m.attention.decoder_layers = 1;
  m.attention.max_decode_length = 8;
  m.attention.max_positions = 32;
  return m;
}

// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("strec_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

// Weighted sum with fixed random weights, so gradients are not all equal.
inline Tensor probe(const Tensor& y, std::uint64_t seed = 99) {
  Rng rng(seed);
  return ops::sum(ops::mul(y, random_tensor(y.shape(), rng)));
}

}  // namespace strec::testing
