// Copyright 2026 The strec Authors
// SPDX-License-Identifier: Apache-2.0

#include "strec/image.hpp"

#include <algorithm>
#include <cmath>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "strec/errors.hpp"

namespace strec {

Image::Image(int h, int w, int c, double fill)
    : height(h), width(w), channels(c),
      pixels(static_cast<std::size_t>(h) * w * c, fill) {}

Image resize_bilinear(const Image& image, int height, int width) {
  if (image.empty()) throw DataError("resize of an empty image");
  Image out(height, width, image.channels);
  const double hi_x = image.width - 1;
  const double hi_y = image.height - 1;
  for (int r = 0; r < height; ++r) {
    const double py = std::clamp((r + 0.5) / height * image.height - 0.5, 0.0, hi_y);
    const int y0 = static_cast<int>(std::floor(py));
    const int y1 = std::min(y0 + 1, image.height - 1);
    const double wy = py - y0;
    for (int c = 0; c < width; ++c) {
      const double px = std::clamp((c + 0.5) / width * image.width - 0.5, 0.0, hi_x);
      const int x0 = static_cast<int>(std::floor(px));
      const int x1 = std::min(x0 + 1, image.width - 1);
      const double wx = px - x0;
      for (int ch = 0; ch < image.channels; ++ch) {
        out.at(r, c, ch) = (1 - wy) * ((1 - wx) * image.at(y0, x0, ch) + wx * image.at(y0, x1, ch)) +
                           wy * ((1 - wx) * image.at(y1, x0, ch) + wx * image.at(y1, x1, ch));
      }
    }
  }
  return out;
}

Tensor images_to_tensor(std::span<const Image> images) {
  if (images.empty()) throw ShapeError("images_to_tensor: no images");
  const Image& first = images.front();
  const std::int64_t n = static_cast<std::int64_t>(images.size());
  const std::int64_t c = first.channels, h = first.height, w = first.width;
  std::vector<double> values(static_cast<std::size_t>(n * c * h * w));
  for (std::int64_t b = 0; b < n; ++b) {
    const Image& img = images[static_cast<std::size_t>(b)];
    if (img.channels != c || img.height != h || img.width != w) {
      throw ShapeError("images_to_tensor: mixed image shapes in batch");
    }
    for (std::int64_t ch = 0; ch < c; ++ch)
      for (std::int64_t y = 0; y < h; ++y)
        for (std::int64_t x = 0; x < w; ++x)
          values[static_cast<std::size_t>(((b * c + ch) * h + y) * w + x)] =
              img.at(static_cast<int>(y), static_cast<int>(x), static_cast<int>(ch));
  }
  return Tensor::from_vector({n, c, h, w}, std::move(values));
}

Image tensor_to_image(const Tensor& batch, std::int64_t index) {
  if (batch.ndim() != 4) throw ShapeError("tensor_to_image: expected [N, C, H, W]");
  const auto c = batch.dim(1), h = batch.dim(2), w = batch.dim(3);
  Image img(static_cast<int>(h), static_cast<int>(w), static_cast<int>(c));
  auto d = batch.data();
  for (std::int64_t ch = 0; ch < c; ++ch)
    for (std::int64_t y = 0; y < h; ++y)
      for (std::int64_t x = 0; x < w; ++x)
        img.at(static_cast<int>(y), static_cast<int>(x), static_cast<int>(ch)) =
            d[static_cast<std::size_t>(((index * c + ch) * h + y) * w + x)];
  return img;
}

Image load_image(const std::filesystem::path& path, int channels) {
  if (channels != 1 && channels != 3) throw ConfigError("load_image: channels must be 1 or 3");
  cv::Mat mat;
  try {
    mat = cv::imread(path.string(), channels == 1 ? cv::IMREAD_GRAYSCALE : cv::IMREAD_COLOR);
  } catch (const cv::Exception& e) {
    throw DataError("cannot decode image '" + path.string() + "': " + e.what());
  }
  if (mat.empty()) throw DataError("cannot decode image '" + path.string() + "'");
  if (channels == 3) cv::cvtColor(mat, mat, cv::COLOR_BGR2RGB);
  Image img(mat.rows, mat.cols, channels);
  for (int y = 0; y < mat.rows; ++y) {
    const std::uint8_t* row = mat.ptr<std::uint8_t>(y);
    for (int x = 0; x < mat.cols * channels; ++x) {
      img.pixels[static_cast<std::size_t>(y) * mat.cols * channels + x] = row[x] / 255.0;
    }
  }
  return img;
}

void save_image(const std::filesystem::path& path, const Image& image) {
  if (image.channels != 1 && image.channels != 3) {
    throw DataError("save_image: unsupported channel count");
  }
  cv::Mat mat(image.height, image.width, image.channels == 1 ? CV_8UC1 : CV_8UC3);
  for (int y = 0; y < image.height; ++y) {
    std::uint8_t* row = mat.ptr<std::uint8_t>(y);
    for (int x = 0; x < image.width * image.channels; ++x) {
      const double v = image.pixels[static_cast<std::size_t>(y) * image.width * image.channels + x];
      row[x] = static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
    }
  }
  if (image.channels == 3) cv::cvtColor(mat, mat, cv::COLOR_RGB2BGR);
  bool ok = false;
  try {
    ok = cv::imwrite(path.string(), mat);
  } catch (const cv::Exception& e) {
    throw DataError("cannot write image '" + path.string() + "': " + e.what());
  }
  if (!ok) throw DataError("cannot write image '" + path.string() + "'");
}

}  // namespace strec
