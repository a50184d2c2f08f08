// Copyright 2026 The strec Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "strec/nn.hpp"

namespace strec {

// Residual feature extractor. Block 0 is a 3x3 stride-1 conv; blocks 1-5
// each hold `units_per_block` residual units whose first unit strides
// (2, 2), (2, 2), (2, 1), (2, 1), (2, 1). A 32x100 input therefore yields
// maps of 32x100, 16x50, 8x25, 4x25, 2x25, 1x25.
struct BackboneConfig {
  int stem_channels = 32;
  std::vector<int> block_channels{32, 64, 128, 256, 512};
  int units_per_block = 3;

  int output_channels() const { return block_channels.back(); }
};

// 1x1 conv -> BN -> ReLU -> 3x3 conv -> BN, plus a 1x1 conv + BN projection
// shortcut when the stride or width changes, then ReLU. The unit's stride
// sits on its first (1x1) conv.
class ResidualUnit {
 public:
  ResidualUnit(ParameterStore& store, const std::string& prefix, int in_channels,
               int out_channels, int stride_h, int stride_w, Rng& rng);
  Tensor operator()(const Tensor& x, bool training) const;

 private:
  Conv2d conv1_;
  BatchNorm2d bn1_;
  Conv2d conv2_;
  BatchNorm2d bn2_;
  bool project_ = false;
  Conv2d shortcut_;
  BatchNorm2d shortcut_bn_;
};

class Backbone {
 public:
  static constexpr int kBlocks = 5;

  Backbone(ParameterStore& store, const std::string& prefix, int in_channels,
           const BackboneConfig& config, Rng& rng);

  // x [B, C, 32, 100] -> feature sequence [B, 25, d]. When `stage_shapes`
  // is given it receives the [H, W] map size after block 0 .. block 5.
  Tensor operator()(const Tensor& x, bool training,
                    std::vector<std::pair<std::int64_t, std::int64_t>>* stage_shapes = nullptr) const;

  const BackboneConfig& config() const { return config_; }

 private:
  BackboneConfig config_;
  int in_channels_;
  Conv2d stem_;
  BatchNorm2d stem_bn_;
  std::vector<std::vector<ResidualUnit>> blocks_;
};

// Sinusoidal position table [max_len, d_model]:
//   i <  d/2: sin(pos / 10000^(2i/d))
//   i >= d/2: cos(pos / 10000^(2i/d))
Tensor positional_encoding(int max_len, int d_model);

// seq [B, L, d] or [L, d] plus the first L rows of table.
Tensor add_positions(const Tensor& seq, const Tensor& table);

}  // namespace strec
