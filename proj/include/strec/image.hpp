// Copyright 2026 The strec Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "strec/tensor.hpp"

namespace strec {

// H x W x C raster, row-major with interleaved channels, values in [0, 1].
struct Image {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<double> pixels;

  Image() = default;
  Image(int h, int w, int c, double fill = 0.0);

  double& at(int y, int x, int c) {
    return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  double at(int y, int x, int c) const {
    return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  bool empty() const { return pixels.empty(); }
};

// Bilinear resize with half-pixel centres and border clamping, i.e. output
// pixel (r, c) samples the source at normalized ((c + 0.5) / w, (r + 0.5) / h).
Image resize_bilinear(const Image& image, int height, int width);

// Converts images of one common shape into an [N, C, H, W] tensor.
Tensor images_to_tensor(std::span<const Image> images);
// Extracts entry `index` of an [N, C, H, W] tensor.
Image tensor_to_image(const Tensor& batch, std::int64_t index = 0);

// PNG/JPEG via OpenCV. Colour images are returned as RGB; `channels` forces
// 1 or 3 channels. Throws DataError if the file cannot be decoded.
Image load_image(const std::filesystem::path& path, int channels = 3);
void save_image(const std::filesystem::path& path, const Image& image);

}  // namespace strec
