// Copyright 2026 The strec Authors
// SPDX-License-Identifier: Apache-2.0

// The full recognition pipeline: resize, rectify, extract column features,
// add positions, encode, decode.

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "strec/backbone.hpp"
#include "strec/image.hpp"
#include "strec/nn.hpp"
#include "strec/recognizer.hpp"
#include "strec/rectifier.hpp"
#include "strec/vocabulary.hpp"

namespace strec {

struct ModelConfig {
  int channels = 3;
  RectifierConfig rectifier;
  BackboneConfig backbone;
  AttentionConfig attention;

  // Throws ConfigError when the pieces do not fit together.
  void validate() const;
};

struct Recognition {
  std::string text;
  double confidence = 0.0;
  bool truncated = false;
};

class Model {
 public:
  Model(const ModelConfig& config, std::uint64_t seed);
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;

  // Any-size images -> [B, C, 64, 256].
  Tensor prepare(std::span<const Image> images) const;
  // [B, C, 64, 256] -> [B, C, 32, 100].
  Tensor rectify(const Tensor& resized) const { return rectifier_(resized); }
  // [B, C, 32, 100] -> [B, L, d] with positions added.
  Tensor features(const Tensor& rectified, bool training) const;
  // Teacher-forced logits [B, T, vocab] for prepared inputs.
  Tensor forward(const Tensor& resized, const TeacherBatch& targets, const ForwardContext& ctx) const;

  std::vector<Recognition> recognize_prepared(const Tensor& resized) const;
  std::vector<Recognition> recognize(std::span<const Image> images) const;
  Recognition recognize(const Image& image) const;
  // Any-size image -> rectified 32x100 image.
  Image rectify(const Image& image) const;

  ParameterStore& store() { return store_; }
  const ParameterStore& store() const { return store_; }
  const ModelConfig& config() const { return config_; }
  const Rectifier& rectifier() const { return rectifier_; }
  const Backbone& backbone() const { return backbone_; }
  const Recognizer& recognizer() const { return recognizer_; }

 private:
  ModelConfig config_;
  ParameterStore store_;
  Rng init_rng_;
  Rectifier rectifier_;
  Backbone backbone_;
  Recognizer recognizer_;
};

}  // namespace strec
