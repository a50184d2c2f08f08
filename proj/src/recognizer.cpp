// Copyright 2026 The strec Authors
// SPDX-License-Identifier: Apache-2.0

#include "strec/recognizer.hpp"

#include <cmath>
#include <limits>

#include "strec/backbone.hpp"
#include "strec/errors.hpp"
#include "strec/ops.hpp"
#include "strec/vocabulary.hpp"

namespace strec {

namespace {

constexpr double kHidden = -std::numeric_limits<double>::infinity();

// [B, n, h * dk] -> [B * h, n, dk]
Tensor split_heads(const Tensor& x, int heads) {
  const std::int64_t b = x.dim(0), n = x.dim(1), dk = x.dim(2) / heads;
  return ops::reshape(ops::permute(ops::reshape(x, {b, n, heads, dk}), {0, 2, 1, 3}),
                      {b * heads, n, dk});
}

// [B * h, n, dv] -> [B, n, h * dv]
Tensor merge_heads(const Tensor& x, std::int64_t batch, int heads) {
  const std::int64_t n = x.dim(1), dv = x.dim(2);
  return ops::reshape(ops::permute(ops::reshape(x, {batch, heads, n, dv}), {0, 2, 1, 3}),
                      {batch, n, heads * dv});
}

}  // namespace

void AttentionConfig::validate() const {
  if (d_model <= 0 || heads <= 0 || d_ff <= 0) {
    throw ConfigError("attention: d_model, heads and d_ff must be positive");
  }
  if (d_model % heads != 0) {
    throw ConfigError("attention: d_model " + std::to_string(d_model) +
                      " not divisible by heads " + std::to_string(heads));
  }
  if (d_model % 2 != 0) throw ConfigError("attention: d_model must be even");
  if (encoder_layers < 1 || decoder_layers < 1) {
    throw ConfigError("attention: encoder and decoder need at least one block");
  }
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("attention: dropout must be in [0, 1)");
  if (max_decode_length < 1) throw ConfigError("attention: max_decode_length must be >= 1");
  if (max_positions < max_decode_length + 1) {
    throw ConfigError("attention: max_positions must exceed max_decode_length");
  }
}

AttentionMask AttentionMask::causal(std::int64_t n) {
  AttentionMask m{n, n, std::vector<double>(static_cast<std::size_t>(n * n), 0.0)};
  for (std::int64_t i = 0; i < n; ++i)
    for (std::int64_t j = i + 1; j < n; ++j) m.values[static_cast<std::size_t>(i * n + j)] = kHidden;
  return m;
}

bool AttentionMask::hidden(std::int64_t i, std::int64_t j) const {
  return values[static_cast<std::size_t>(i * cols + j)] == kHidden;
}

AttentionOutput scaled_dot_product_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                                             const AttentionMask* mask) {
  const bool unbatched = q.ndim() == 2;
  const Tensor q3 = unbatched ? ops::reshape(q, {1, q.dim(0), q.dim(1)}) : q;
  const Tensor k3 = unbatched ? ops::reshape(k, {1, k.dim(0), k.dim(1)}) : k;
  const Tensor v3 = unbatched ? ops::reshape(v, {1, v.dim(0), v.dim(1)}) : v;
  if (q3.ndim() != 3 || k3.ndim() != 3 || v3.ndim() != 3 || k3.dim(1) != v3.dim(1) ||
      q3.dim(2) != k3.dim(2) || q3.dim(0) != k3.dim(0) || k3.dim(0) != v3.dim(0)) {
    throw ShapeError("attention: Q " + shape_to_string(q.shape()) + ", K " +
                     shape_to_string(k.shape()) + ", V " + shape_to_string(v.shape()));
  }
  const std::int64_t n = q3.dim(1), m = k3.dim(1);
  if (mask && (mask->rows != n || mask->cols != m)) {
    throw ShapeError("attention: mask is " + std::to_string(mask->rows) + "x" +
                     std::to_string(mask->cols) + ", scores are " + std::to_string(n) + "x" +
                     std::to_string(m));
  }
  const double scale = 1.0 / std::sqrt(static_cast<double>(q3.dim(2)));
  const Tensor scores = ops::scale(ops::bmm(q3, k3, true), scale);
  const Tensor weights = mask ? ops::masked_softmax(scores, mask->values, 1)
                              : ops::masked_softmax(scores);
  const Tensor out = ops::bmm(weights, v3);
  if (!unbatched) return {out, weights};
  return {ops::reshape(out, {n, v3.dim(2)}), ops::reshape(weights, {n, m})};
}

Tensor multi_head_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                            const MultiHeadWeights& w, int heads, std::span<const double> mask,
                            std::int64_t mask_groups) {
  if (q.ndim() != 3 || k.ndim() != 3 || v.ndim() != 3 || k.dim(1) != v.dim(1) ||
      q.dim(0) != k.dim(0) || k.dim(0) != v.dim(0)) {
    throw ShapeError("multi-head attention: Q " + shape_to_string(q.shape()) + ", K " +
                     shape_to_string(k.shape()) + ", V " + shape_to_string(v.shape()));
  }
  if (heads < 1 || w.wq.dim(1) % heads != 0 || w.wv.dim(1) % heads != 0 ||
      w.wo.dim(0) != w.wv.dim(1)) {
    throw ShapeError("multi-head attention: projection shapes do not split into " +
                     std::to_string(heads) + " heads");
  }
  const std::int64_t batch = q.dim(0);
  if (!mask.empty() && mask_groups != 1 && mask_groups != batch) {
    throw ShapeError("multi-head attention: mask groups must be 1 or the batch size");
  }
  const Tensor qh = split_heads(ops::linear(q, w.wq), heads);
  const Tensor kh = split_heads(ops::linear(k, w.wk), heads);
  const Tensor vh = split_heads(ops::linear(v, w.wv), heads);
  const double scale = 1.0 / std::sqrt(static_cast<double>(qh.dim(2)));
  const Tensor scores = ops::scale(ops::bmm(qh, kh, true), scale);
  const Tensor attn = ops::masked_softmax(scores, mask, mask.empty() ? 1 : mask_groups);
  return ops::linear(merge_heads(ops::bmm(attn, vh), batch, heads), w.wo);
}

MultiHeadAttention::MultiHeadAttention(ParameterStore& store, const std::string& prefix,
                                       int d_model, int heads, Rng& rng)
    : heads_(heads) {
  weights_.wq = Linear::create(store, prefix + ".wq", d_model, d_model, rng, false).weight;
  weights_.wk = Linear::create(store, prefix + ".wk", d_model, d_model, rng, false).weight;
  weights_.wv = Linear::create(store, prefix + ".wv", d_model, d_model, rng, false).weight;
  weights_.wo = Linear::create(store, prefix + ".wo", d_model, d_model, rng, false).weight;
}

FeedForward::FeedForward(ParameterStore& store, const std::string& prefix, int d_model, int d_ff,
                         Rng& rng)
    : inner_(Linear::create(store, prefix + ".inner", d_model, d_ff, rng)),
      outer_(Linear::create(store, prefix + ".outer", d_ff, d_model, rng)) {}

Tensor FeedForward::operator()(const Tensor& x) const { return outer_(ops::relu(inner_(x))); }

EncoderBlock::EncoderBlock(ParameterStore& store, const std::string& prefix,
                           const AttentionConfig& config, Rng& rng)
    : dropout_(config.dropout),
      attention_(store, prefix + ".attention", config.d_model, config.heads, rng),
      norm1_(LayerNorm::create(store, prefix + ".norm1", config.d_model)),
      ffn_(store, prefix + ".ffn", config.d_model, config.d_ff, rng),
      norm2_(LayerNorm::create(store, prefix + ".norm2", config.d_model)) {}

Tensor EncoderBlock::operator()(const Tensor& x, const ForwardContext& ctx) const {
  Rng fallback;
  Rng& rng = ctx.rng ? *ctx.rng : fallback;
  const Tensor y = norm1_(ops::add(x, ops::dropout(attention_(x, x), dropout_, ctx.training, rng)));
  return norm2_(ops::add(y, ops::dropout(ffn_(y), dropout_, ctx.training, rng)));
}

DecoderBlock::DecoderBlock(ParameterStore& store, const std::string& prefix,
                           const AttentionConfig& config, Rng& rng)
    : dropout_(config.dropout),
      self_attention_(store, prefix + ".self_attention", config.d_model, config.heads, rng),
      norm1_(LayerNorm::create(store, prefix + ".norm1", config.d_model)),
      cross_attention_(store, prefix + ".cross_attention", config.d_model, config.heads, rng),
      norm2_(LayerNorm::create(store, prefix + ".norm2", config.d_model)),
      ffn_(store, prefix + ".ffn", config.d_model, config.d_ff, rng),
      norm3_(LayerNorm::create(store, prefix + ".norm3", config.d_model)) {}

Tensor DecoderBlock::operator()(const Tensor& x, const Tensor& memory,
                                std::span<const double> self_mask, std::int64_t mask_groups,
                                const ForwardContext& ctx) const {
  Rng fallback;
  Rng& rng = ctx.rng ? *ctx.rng : fallback;
  Tensor h = norm1_(ops::add(
      x, ops::dropout(self_attention_(x, x, self_mask, mask_groups), dropout_, ctx.training, rng)));
  h = norm2_(ops::add(h, ops::dropout(cross_attention_(h, memory), dropout_, ctx.training, rng)));
  return norm3_(ops::add(h, ops::dropout(ffn_(h), dropout_, ctx.training, rng)));
}

Recognizer::Recognizer(ParameterStore& store, const std::string& prefix,
                       const AttentionConfig& config, Rng& rng)
    : config_(config) {
  config.validate();
  positions_ = positional_encoding(config.max_positions, config.d_model);
  embedding_ = Embedding::create(store, prefix + ".embedding", Vocabulary::kSize, config.d_model, rng);
  for (int i = 0; i < config.encoder_layers; ++i) {
    encoder_.emplace_back(store, prefix + ".encoder" + std::to_string(i), config, rng);
  }
  for (int i = 0; i < config.decoder_layers; ++i) {
    decoder_.emplace_back(store, prefix + ".decoder" + std::to_string(i), config, rng);
  }
  output_ = Linear::create(store, prefix + ".output", config.d_model, Vocabulary::kSize, rng);
}

Tensor Recognizer::encode(const Tensor& features, const ForwardContext& ctx) const {
  if (features.ndim() != 3 || features.dim(2) != config_.d_model) {
    throw ShapeError("encoder: expected [B, L, " + std::to_string(config_.d_model) + "], got " +
                     shape_to_string(features.shape()));
  }
  Tensor h = features;
  for (const auto& block : encoder_) h = block(h, ctx);
  return h;
}

Tensor Recognizer::decode_train(std::span<const int> inputs, std::int64_t batch,
                                std::int64_t length, const Tensor& memory,
                                const ForwardContext& ctx) const {
  if (length < 1 || static_cast<std::int64_t>(inputs.size()) != batch * length) {
    throw ShapeError("decoder: " + std::to_string(inputs.size()) + " tokens for batch " +
                     std::to_string(batch) + " x length " + std::to_string(length));
  }
  if (length > config_.max_positions) {
    throw ShapeError("decoder: target length " + std::to_string(length) +
                     " exceeds the configured maximum " + std::to_string(config_.max_positions));
  }
  if (memory.ndim() != 3 || memory.dim(0) != batch || memory.dim(2) != config_.d_model) {
    throw ShapeError("decoder: memory " + shape_to_string(memory.shape()) + " for batch " +
                     std::to_string(batch));
  }
  // Causal mask plus hidden <pad> keys, one block per batch entry.
  std::vector<double> mask(static_cast<std::size_t>(batch * length * length), 0.0);
  for (std::int64_t b = 0; b < batch; ++b)
    for (std::int64_t i = 0; i < length; ++i)
      for (std::int64_t j = 0; j < length; ++j) {
        const bool pad_key = inputs[static_cast<std::size_t>(b * length + j)] == Vocabulary::kPad;
        if (j > i || pad_key) {
          mask[static_cast<std::size_t>((b * length + i) * length + j)] = kHidden;
        }
      }
  Rng fallback;
  Rng& rng = ctx.rng ? *ctx.rng : fallback;
  Tensor h = ops::reshape(ops::embedding(embedding_.table, inputs), {batch, length, config_.d_model});
  h = ops::dropout(add_positions(h, positions_), config_.dropout, ctx.training, rng);
  for (const auto& block : decoder_) h = block(h, memory, mask, batch, ctx);
  return output_(h);
}

int argmax(std::span<const double> values) {
  int best = 0;
  for (std::size_t i = 1; i < values.size(); ++i)
    if (values[i] > values[static_cast<std::size_t>(best)]) best = static_cast<int>(i);
  return best;
}

std::vector<DecodeResult> Recognizer::greedy_decode(const Tensor& memory, int max_len) const {
  if (max_len < 1) throw ConfigError("greedy_decode: max_len must be >= 1");
  if (max_len + 1 > config_.max_positions) {
    throw ConfigError("greedy_decode: max_len exceeds the position table");
  }
  NoGradGuard no_grad;
  const ForwardContext ctx;
  const std::int64_t batch = memory.dim(0);
  std::vector<DecodeResult> results(static_cast<std::size_t>(batch));
  std::vector<std::vector<int>> prefix(static_cast<std::size_t>(batch), {Vocabulary::kStart});
  std::vector<bool> done(static_cast<std::size_t>(batch), false);
  const int vocab = Vocabulary::kSize;
  for (int step = 0; step < max_len; ++step) {
    const std::int64_t length = step + 1;
    std::vector<int> flat;
    flat.reserve(static_cast<std::size_t>(batch * length));
    for (const auto& p : prefix) flat.insert(flat.end(), p.begin(), p.end());
    const Tensor logits = decode_train(flat, batch, length, memory, ctx);
    auto ld = logits.data();
    bool all_done = true;
    for (std::int64_t b = 0; b < batch; ++b) {
      auto& res = results[static_cast<std::size_t>(b)];
      if (done[static_cast<std::size_t>(b)]) {
        prefix[static_cast<std::size_t>(b)].push_back(Vocabulary::kPad);
        continue;
      }
      const auto row = ld.subspan(static_cast<std::size_t>((b * length + step) * vocab),
                                  static_cast<std::size_t>(vocab));
      const int token = argmax(row);
      double total = 0.0;
      for (double z : row) total += std::exp(z - row[static_cast<std::size_t>(token)]);
      res.confidence *= 1.0 / total;
      prefix[static_cast<std::size_t>(b)].push_back(token);
      if (token == Vocabulary::kEnd) {
        done[static_cast<std::size_t>(b)] = true;
        continue;
      }
      if (token < Vocabulary::kPrintable) res.tokens.push_back(token);
      all_done = false;
    }
    if (all_done) break;
  }
  for (std::int64_t b = 0; b < batch; ++b) {
    results[static_cast<std::size_t>(b)].truncated = !done[static_cast<std::size_t>(b)];
  }
  return results;
}

}  // namespace strec
