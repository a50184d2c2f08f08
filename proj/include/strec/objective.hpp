// Copyright 2026 The strec Authors
// SPDX-License-Identifier: Apache-2.0

// Sequence training objectives over decoder logits.

#pragma once

#include <span>
#include <string>

#include "strec/tensor.hpp"

namespace strec {

enum class LossFamily { kFocal, kNll };

std::string to_string(LossFamily family);
// "focal" or "nll"; throws ConfigError otherwise.
LossFamily parse_loss_family(const std::string& name);

struct LossConfig {
  LossFamily family = LossFamily::kFocal;
  double alpha = 1.0;  // constant over positions and classes
  double gamma = 2.0;

  void validate() const;
};

// Probabilities below this are clamped before the logarithm.
inline constexpr double kProbabilityFloor = 1e-12;

// -alpha (1 - p)^gamma log p for a single probability.
double focal_term(double p, double alpha, double gamma);

// logits [T, V] or [B, T, V]; labels hold B * T class ids with <pad> marking
// ignored positions. Each sequence is averaged over its non-pad positions,
// then sequences are averaged. Throws DataError if a sequence has no
// non-pad position.
Tensor focal_loss(const Tensor& logits, std::span<const int> labels, double alpha, double gamma);
Tensor nll_loss(const Tensor& logits, std::span<const int> labels);

Tensor sequence_loss(const Tensor& logits, std::span<const int> labels, const LossConfig& config);

}  // namespace strec
