// Copyright 2026 The strec Authors
// SPDX-License-Identifier: Apache-2.0

#include "strec/model.hpp"

#include "strec/errors.hpp"

namespace strec {

void ModelConfig::validate() const {
  if (channels != 1 && channels != 3) throw ConfigError("model.channels must be 1 or 3");
  attention.validate();
  if (attention.d_model != backbone.output_channels()) {
    throw ConfigError("model.d_model (" + std::to_string(attention.d_model) +
                      ") must equal the last backbone block width (" +
                      std::to_string(backbone.output_channels()) + ")");
  }
  if (attention.max_positions < kRectifiedWidth / 4) {
    throw ConfigError("model.max_positions must cover the 25 feature columns");
  }
  const auto& loc = rectifier.localization;
  if (loc.channels.size() != 6) {
    throw ConfigError("model.rectifier.channels: expected 6 conv widths, got " +
                      std::to_string(loc.channels.size()));
  }
  if (loc.num_points < 4 || loc.num_points % 2 != 0) {
    throw ConfigError("model.rectifier.points must be even and >= 4");
  }
  if (loc.fc_units < 1) throw ConfigError("model.rectifier.fc_units must be positive");
  if (!(rectifier.regularization >= 0.0)) {
    throw ConfigError("model.rectifier.regularization must be >= 0");
  }
}

namespace {

const ModelConfig& validated(const ModelConfig& config) {
  config.validate();
  return config;
}

}  // namespace

Model::Model(const ModelConfig& config, std::uint64_t seed)
    : config_(validated(config)),
      init_rng_(seed),
      rectifier_(store_, "rectifier", config.channels, config.rectifier, init_rng_),
      backbone_(store_, "backbone", config.channels, config.backbone, init_rng_),
      recognizer_(store_, "recognizer", config.attention, init_rng_) {}

Tensor Model::prepare(std::span<const Image> images) const {
  std::vector<Image> resized;
  resized.reserve(images.size());
  for (const Image& img : images) {
    if (img.channels != config_.channels) {
      throw ShapeError("model expects " + std::to_string(config_.channels) +
                       "-channel images, got " + std::to_string(img.channels));
    }
    resized.push_back(resize_bilinear(img, kRectifierInputHeight, kRectifierInputWidth));
  }
  return images_to_tensor(resized);
}

Tensor Model::features(const Tensor& rectified, bool training) const {
  return add_positions(backbone_(rectified, training), recognizer_.positions());
}

Tensor Model::forward(const Tensor& resized, const TeacherBatch& targets,
                      const ForwardContext& ctx) const {
  if (resized.dim(0) != targets.batch) {
    throw ShapeError("model: " + std::to_string(resized.dim(0)) + " images for " +
                     std::to_string(targets.batch) + " targets");
  }
  const Tensor memory = recognizer_.encode(features(rectify(resized), ctx.training), ctx);
  return recognizer_.decode_train(targets.inputs, targets.batch, targets.length, memory, ctx);
}

std::vector<Recognition> Model::recognize_prepared(const Tensor& resized) const {
  NoGradGuard no_grad;
  const ForwardContext ctx;
  const Tensor memory = recognizer_.encode(features(rectify(resized), false), ctx);
  const auto decoded = recognizer_.greedy_decode(memory, config_.attention.max_decode_length);
  std::vector<Recognition> out;
  out.reserve(decoded.size());
  for (const auto& d : decoded) {
    out.push_back({Vocabulary::instance().decode(d.tokens), d.confidence, d.truncated});
  }
  return out;
}

std::vector<Recognition> Model::recognize(std::span<const Image> images) const {
  if (images.empty()) return {};
  return recognize_prepared(prepare(images));
}

Recognition Model::recognize(const Image& image) const {
  return recognize(std::span<const Image>(&image, 1)).front();
}

Image Model::rectify(const Image& image) const {
  NoGradGuard no_grad;
  return tensor_to_image(rectify(prepare(std::span<const Image>(&image, 1))));
}

}  // namespace strec
