// Copyright 2026 The strec Authors
// SPDX-License-Identifier: Apache-2.0

// Self-attention encoder-decoder over feature sequences.

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "strec/nn.hpp"

namespace strec {

struct AttentionConfig {
  int d_model = 512;
  int heads = 8;
  int d_ff = 2048;
  int encoder_layers = 4;
  int decoder_layers = 4;
  double dropout = 0.1;
  int max_decode_length = 30;
  // Rows in the shared position table (feature columns and decoder steps).
  int max_positions = 64;

  int head_dim() const { return d_model / heads; }
  // Throws ConfigError on inconsistent sizes.
  void validate() const;
};

// Additive attention mask of 0 (visible) and -inf (hidden) entries.
struct AttentionMask {
  std::int64_t rows = 0;
  std::int64_t cols = 0;
  std::vector<double> values;

  // Entry (i, j) hidden iff j > i.
  static AttentionMask causal(std::int64_t n);
  bool hidden(std::int64_t i, std::int64_t j) const;
};

struct AttentionOutput {
  Tensor output;   // [n, d_v] or [G, n, d_v]
  Tensor weights;  // [n, m] or [G, n, m]
};

// softmax(Q K^T / sqrt(d_k) + mask) V for q [n, d_k], k [m, d_k], v [m, d_v],
// or the same with a leading group axis (the mask is shared by all groups).
AttentionOutput scaled_dot_product_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                                             const AttentionMask* mask = nullptr);

// Per-head projections are column blocks of the concatenated matrices:
// W_i^Q = wq[:, i*d_k : (i+1)*d_k] and likewise for K and V.
struct MultiHeadWeights {
  Tensor wq;  // [d_model, h * d_k]
  Tensor wk;  // [d_model, h * d_k]
  Tensor wv;  // [d_model, h * d_v]
  Tensor wo;  // [h * d_v, d_model]
};

// Concat(head_1 .. head_h) W^O over q [B, n, d], k/v [B, m, d]. `mask`
// holds either one n x m block shared by the batch or B blocks.
Tensor multi_head_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                            const MultiHeadWeights& weights, int heads,
                            std::span<const double> mask = {}, std::int64_t mask_groups = 1);

class MultiHeadAttention {
 public:
  MultiHeadAttention() = default;
  MultiHeadAttention(ParameterStore& store, const std::string& prefix, int d_model, int heads,
                     Rng& rng);

  Tensor operator()(const Tensor& query, const Tensor& memory, std::span<const double> mask = {},
                    std::int64_t mask_groups = 1) const {
    return multi_head_attention(query, memory, memory, weights_, heads_, mask, mask_groups);
  }
  const MultiHeadWeights& weights() const { return weights_; }

 private:
  MultiHeadWeights weights_;
  int heads_ = 1;
};

// Two affine maps with a ReLU between.
class FeedForward {
 public:
  FeedForward() = default;
  FeedForward(ParameterStore& store, const std::string& prefix, int d_model, int d_ff, Rng& rng);
  Tensor operator()(const Tensor& x) const;

 private:
  Linear inner_;
  Linear outer_;
};

// y = LN(x + Drop(MHA(x, x, x))); out = LN(y + Drop(FFN(y))).
class EncoderBlock {
 public:
  EncoderBlock(ParameterStore& store, const std::string& prefix, const AttentionConfig& config,
               Rng& rng);
  Tensor operator()(const Tensor& x, const ForwardContext& ctx) const;

 private:
  double dropout_;
  MultiHeadAttention attention_;
  LayerNorm norm1_;
  FeedForward ffn_;
  LayerNorm norm2_;
};

// Masked self-attention, cross-attention over the encoder memory, FFN;
// each wrapped as LN(x + Drop(sublayer(x))).
class DecoderBlock {
 public:
  DecoderBlock(ParameterStore& store, const std::string& prefix, const AttentionConfig& config,
               Rng& rng);
  Tensor operator()(const Tensor& x, const Tensor& memory, std::span<const double> self_mask,
                    std::int64_t mask_groups, const ForwardContext& ctx) const;

 private:
  double dropout_;
  MultiHeadAttention self_attention_;
  LayerNorm norm1_;
  MultiHeadAttention cross_attention_;
  LayerNorm norm2_;
  FeedForward ffn_;
  LayerNorm norm3_;
};

struct DecodeResult {
  std::vector<int> tokens;  // printable tokens only
  double confidence = 1.0;  // product of the per-step maximum probabilities
  bool truncated = false;   // max length reached before <end>
};

class Recognizer {
 public:
  Recognizer(ParameterStore& store, const std::string& prefix, const AttentionConfig& config,
             Rng& rng);

  // features [B, L, d] (positions already added) -> memory [B, L, d].
  Tensor encode(const Tensor& features, const ForwardContext& ctx) const;

  // Teacher-forced decoding. `inputs` holds batch x length token ids that
  // start with <start>; returns logits [B, T, vocab]. Position t depends only
  // on inputs[.., <= t] and the memory.
  Tensor decode_train(std::span<const int> inputs, std::int64_t batch, std::int64_t length,
                      const Tensor& memory, const ForwardContext& ctx) const;

  // Greedy left-to-right decoding from <start> until <end> or max_len steps.
  // Argmax ties resolve to the lowest index.
  std::vector<DecodeResult> greedy_decode(const Tensor& memory, int max_len) const;

  const Tensor& positions() const { return positions_; }
  const AttentionConfig& config() const { return config_; }

 private:
  AttentionConfig config_;
  Tensor positions_;
  Embedding embedding_;
  std::vector<EncoderBlock> encoder_;
  std::vector<DecoderBlock> decoder_;
  Linear output_;
};

// Index of the largest value, lowest index on ties.
int argmax(std::span<const double> values);

}  // namespace strec
