// Copyright 2026 The strec Authors
// SPDX-License-Identifier: Apache-2.0

#include "strec/objective.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "strec/errors.hpp"
#include "strec/vocabulary.hpp"

namespace strec {

namespace {

using i64 = std::int64_t;

struct Layout {
  i64 batch;
  i64 length;
  i64 classes;
  std::vector<double> weight;  // 1 / n_b / B per non-pad position, 0 on pads
};

Layout check_layout(const Tensor& logits, std::span<const int> labels, const char* what) {
  if (logits.ndim() != 2 && logits.ndim() != 3) {
    throw ShapeError(std::string(what) + ": expected logits [T, V] or [B, T, V], got " +
                     shape_to_string(logits.shape()));
  }
  Layout lay{logits.ndim() == 3 ? logits.dim(0) : 1, logits.dim(-2), logits.dim(-1), {}};
  if (static_cast<i64>(labels.size()) != lay.batch * lay.length) {
    throw ShapeError(std::string(what) + ": " + std::to_string(labels.size()) +
                     " labels for logits " + shape_to_string(logits.shape()));
  }
  lay.weight.assign(labels.size(), 0.0);
  for (i64 b = 0; b < lay.batch; ++b) {
    i64 count = 0;
    for (i64 t = 0; t < lay.length; ++t) {
      const int y = labels[static_cast<std::size_t>(b * lay.length + t)];
      if (y == Vocabulary::kPad) continue;
      if (y < 0 || y >= lay.classes) {
        throw ShapeError(std::string(what) + ": label " + std::to_string(y) + " outside " +
                         std::to_string(lay.classes) + " classes");
      }
      ++count;
    }
    if (count == 0) throw DataError(std::string(what) + ": empty target (all positions are <pad>)");
    const double w = 1.0 / static_cast<double>(count) / static_cast<double>(lay.batch);
    for (i64 t = 0; t < lay.length; ++t) {
      const auto i = static_cast<std::size_t>(b * lay.length + t);
      if (labels[i] != Vocabulary::kPad) lay.weight[i] = w;
    }
  }
  return lay;
}

double row_log_sum_exp(const double* row, i64 n) {
  const double mx = *std::max_element(row, row + n);
  double total = 0.0;
  for (i64 j = 0; j < n; ++j) total += std::exp(row[j] - mx);
  return mx + std::log(total);
}

}  // namespace

std::string to_string(LossFamily family) { return family == LossFamily::kFocal ? "focal" : "nll"; }

LossFamily parse_loss_family(const std::string& name) {
  if (name == "focal") return LossFamily::kFocal;
  if (name == "nll") return LossFamily::kNll;
  throw ConfigError("loss.family: expected focal or nll, got '" + name + "'");
}

void LossConfig::validate() const {
  if (family == LossFamily::kNll) return;
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw ConfigError("loss.alpha must be positive");
  if (!(gamma >= 0.0) || !std::isfinite(gamma)) throw ConfigError("loss.gamma must be >= 0");
}

double focal_term(double p, double alpha, double gamma) {
  const double pf = std::max(p, kProbabilityFloor);
  return -alpha * std::pow(1.0 - p, gamma) * std::log(pf);
}

Tensor focal_loss(const Tensor& logits, std::span<const int> labels, double alpha, double gamma) {
  const Layout lay = check_layout(logits, labels, "focal_loss");
  const i64 v = lay.classes;
  const auto positions = static_cast<i64>(labels.size());
  // Per-position dL/dp factor in the softmax chain: g_t (delta_jy - s_j).
  auto factors = std::make_shared<std::vector<double>>(labels.size(), 0.0);
  auto lses = std::make_shared<std::vector<double>>(labels.size(), 0.0);
  auto ld = logits.data();
  const double log_floor = std::log(kProbabilityFloor);
  double loss = 0.0;
  for (i64 i = 0; i < positions; ++i) {
    const double w = lay.weight[static_cast<std::size_t>(i)];
    if (w == 0.0) continue;
    const double* row = ld.data() + i * v;
    const double lse = row_log_sum_exp(row, v);
    (*lses)[static_cast<std::size_t>(i)] = lse;
    const double log_p = row[labels[static_cast<std::size_t>(i)]] - lse;
    const double p = std::exp(log_p);
    const double q = -std::expm1(log_p);  // 1 - p without cancellation
    const double log_pf = std::max(log_p, log_floor);
    const double mod = std::pow(q, gamma);
    loss += w * (-alpha * mod * log_pf);
    // d/dz_j FL = alpha [gamma (1-p)^(gamma-1) p log p - (1-p)^gamma] (delta_jy - s_j)
    const double lead = (gamma == 0.0 || q <= 0.0) ? 0.0 : gamma * std::pow(q, gamma - 1.0) * p * log_pf;
    (*factors)[static_cast<std::size_t>(i)] = w * alpha * (lead - mod);
  }
  std::vector<int> label_copy(labels.begin(), labels.end());
  return Tensor::make_result(
      {}, {loss}, {logits},
      [factors, lses, labels = std::move(label_copy), v, positions](
          std::span<const double> g, std::span<const double>, std::vector<Tensor>& in) {
        if (!in[0].requires_grad()) return;
        auto gx = in[0].grad_buffer();
        auto xd = in[0].data();
        for (i64 i = 0; i < positions; ++i) {
          const double f = (*factors)[static_cast<std::size_t>(i)] * g[0];
          if (f == 0.0) continue;
          const double* row = xd.data() + i * v;
          const double lse = (*lses)[static_cast<std::size_t>(i)];
          const int y = labels[static_cast<std::size_t>(i)];
          for (i64 j = 0; j < v; ++j) {
            const double s = std::exp(row[j] - lse);
            gx[static_cast<std::size_t>(i * v + j)] += f * ((j == y ? 1.0 : 0.0) - s);
          }
        }
      },
      "focal_loss");
}

Tensor nll_loss(const Tensor& logits, std::span<const int> labels) {
  const Layout lay = check_layout(logits, labels, "nll_loss");
  const i64 v = lay.classes;
  const auto positions = static_cast<i64>(labels.size());
  auto ld = logits.data();
  const double log_floor = std::log(kProbabilityFloor);
  double loss = 0.0;
  for (i64 i = 0; i < positions; ++i) {
    const double w = lay.weight[static_cast<std::size_t>(i)];
    if (w == 0.0) continue;
    const double* row = ld.data() + i * v;
    loss -= w * std::max(row[labels[static_cast<std::size_t>(i)]] - row_log_sum_exp(row, v), log_floor);
  }
  std::vector<int> label_copy(labels.begin(), labels.end());
  return Tensor::make_result(
      {}, {loss}, {logits},
      [weight = lay.weight, labels = std::move(label_copy), v, positions](
          std::span<const double> g, std::span<const double>, std::vector<Tensor>& in) {
        if (!in[0].requires_grad()) return;
        auto gx = in[0].grad_buffer();
        auto xd = in[0].data();
        for (i64 i = 0; i < positions; ++i) {
          const double w = weight[static_cast<std::size_t>(i)] * g[0];
          if (w == 0.0) continue;
          const double* row = xd.data() + i * v;
          const double lse = row_log_sum_exp(row, v);
          const int y = labels[static_cast<std::size_t>(i)];
          for (i64 j = 0; j < v; ++j) {
            gx[static_cast<std::size_t>(i * v + j)] += w * (std::exp(row[j] - lse) - (j == y ? 1.0 : 0.0));
          }
        }
      },
      "nll_loss");
}

Tensor sequence_loss(const Tensor& logits, std::span<const int> labels, const LossConfig& config) {
  config.validate();
  if (config.family == LossFamily::kNll) return nll_loss(logits, labels);
  return focal_loss(logits, labels, config.alpha, config.gamma);
}

}  // namespace strec
