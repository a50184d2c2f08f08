// Copyright 2026 The strec Authors
// SPDX-License-Identifier: Apache-2.0

#include "strec/backbone.hpp"

#include <cmath>

#include "strec/errors.hpp"
#include "strec/ops.hpp"
#include "strec/rectifier.hpp"

namespace strec {

namespace {

constexpr int kStrideH[Backbone::kBlocks] = {2, 2, 2, 2, 2};
constexpr int kStrideW[Backbone::kBlocks] = {2, 2, 1, 1, 1};

}  // namespace

ResidualUnit::ResidualUnit(ParameterStore& store, const std::string& prefix, int in_channels,
                           int out_channels, int stride_h, int stride_w, Rng& rng) {
  conv1_ = Conv2d::create(store, prefix + ".conv1", in_channels, out_channels, 1, stride_h,
                          stride_w, 0, false, rng);
  bn1_ = BatchNorm2d::create(store, prefix + ".bn1", out_channels);
  conv2_ = Conv2d::create(store, prefix + ".conv2", out_channels, out_channels, 3, 1, 1, 1,
                          false, rng);
  bn2_ = BatchNorm2d::create(store, prefix + ".bn2", out_channels);
  project_ = stride_h != 1 || stride_w != 1 || in_channels != out_channels;
  if (project_) {
    shortcut_ = Conv2d::create(store, prefix + ".shortcut", in_channels, out_channels, 1,
                               stride_h, stride_w, 0, false, rng);
    shortcut_bn_ = BatchNorm2d::create(store, prefix + ".shortcut_bn", out_channels);
  }
}

Tensor ResidualUnit::operator()(const Tensor& x, bool training) const {
  Tensor h = ops::relu(bn1_(conv1_(x), training));
  h = bn2_(conv2_(h), training);
  const Tensor skip = project_ ? shortcut_bn_(shortcut_(x), training) : x;
  return ops::relu(ops::add(h, skip));
}

Backbone::Backbone(ParameterStore& store, const std::string& prefix, int in_channels,
                   const BackboneConfig& config, Rng& rng)
    : config_(config), in_channels_(in_channels) {
  if (config.block_channels.size() != kBlocks) {
    throw ConfigError("backbone: expected 5 block widths, got " +
                      std::to_string(config.block_channels.size()));
  }
  if (config.units_per_block < 1 || config.stem_channels < 1) {
    throw ConfigError("backbone: units_per_block and stem_channels must be positive");
  }
  stem_ = Conv2d::create(store, prefix + ".stem", in_channels, config.stem_channels, 3, 1, 1, 1,
                         false, rng);
  stem_bn_ = BatchNorm2d::create(store, prefix + ".stem_bn", config.stem_channels);
  int channels = config.stem_channels;
  for (int b = 0; b < kBlocks; ++b) {
    const int width = config.block_channels[static_cast<std::size_t>(b)];
    if (width < 1) throw ConfigError("backbone: non-positive block width");
    std::vector<ResidualUnit> units;
    for (int u = 0; u < config.units_per_block; ++u) {
      const bool first = u == 0;
      units.emplace_back(store,
                         prefix + ".block" + std::to_string(b + 1) + ".unit" + std::to_string(u),
                         channels, width, first ? kStrideH[b] : 1, first ? kStrideW[b] : 1, rng);
      channels = width;
    }
    blocks_.push_back(std::move(units));
  }
}

Tensor Backbone::operator()(const Tensor& x, bool training,
                            std::vector<std::pair<std::int64_t, std::int64_t>>* stage_shapes) const {
  if (x.ndim() != 4 || x.dim(1) != in_channels_ || x.dim(2) != kRectifiedHeight ||
      x.dim(3) != kRectifiedWidth) {
    throw ShapeError("backbone block 0: expected [B, " + std::to_string(in_channels_) +
                     ", 32, 100] input, got " + shape_to_string(x.shape()));
  }
  Tensor h = ops::relu(stem_bn_(stem_(x), training));
  if (stage_shapes) {
    stage_shapes->clear();
    stage_shapes->emplace_back(h.dim(2), h.dim(3));
  }
  for (const auto& block : blocks_) {
    for (const auto& unit : block) h = unit(h, training);
    if (stage_shapes) stage_shapes->emplace_back(h.dim(2), h.dim(3));
  }
  if (h.dim(2) != 1) {
    throw ShapeError("backbone block 5: expected height 1, got " + shape_to_string(h.shape()));
  }
  // [B, C, 1, W] -> [B, W, C]: one feature vector per column.
  const std::int64_t batch = h.dim(0), channels = h.dim(1), width = h.dim(3);
  return ops::permute(ops::reshape(h, {batch, channels, width}), {0, 2, 1});
}

Tensor positional_encoding(int max_len, int d_model) {
  if (max_len < 1) throw ConfigError("positional_encoding: max_len must be positive");
  if (d_model < 2 || d_model % 2 != 0) {
    throw ConfigError("positional_encoding: d_model must be even, got " + std::to_string(d_model));
  }
  std::vector<double> table(static_cast<std::size_t>(max_len) * d_model);
  const int half = d_model / 2;
  for (int pos = 0; pos < max_len; ++pos) {
    for (int i = 0; i < d_model; ++i) {
      const double angle = pos / std::pow(10000.0, 2.0 * i / d_model);
      table[static_cast<std::size_t>(pos) * d_model + i] =
          i < half ? std::sin(angle) : std::cos(angle);
    }
  }
  return Tensor::from_vector({max_len, d_model}, std::move(table));
}

Tensor add_positions(const Tensor& seq, const Tensor& table) {
  if (seq.ndim() != 2 && seq.ndim() != 3) {
    throw ShapeError("add_positions: expected [L, d] or [B, L, d], got " +
                     shape_to_string(seq.shape()));
  }
  const std::int64_t len = seq.dim(-2), d = seq.dim(-1);
  if (table.ndim() != 2 || table.dim(1) != d) {
    throw ShapeError("add_positions: dimension mismatch between sequence " +
                     shape_to_string(seq.shape()) + " and table " + shape_to_string(table.shape()));
  }
  if (len > table.dim(0)) {
    throw ShapeError("add_positions: sequence length " + std::to_string(len) +
                     " exceeds table length " + std::to_string(table.dim(0)));
  }
  const std::int64_t batch = seq.ndim() == 3 ? seq.dim(0) : 1;
  std::vector<double> rows(static_cast<std::size_t>(batch * len * d));
  auto td = table.data();
  for (std::int64_t b = 0; b < batch; ++b)
    std::copy(td.begin(), td.begin() + len * d, rows.begin() + b * len * d);
  return ops::add(seq, Tensor::from_vector(seq.shape(), std::move(rows)));
}

}  // namespace strec
