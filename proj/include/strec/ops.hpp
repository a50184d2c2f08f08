// Copyright 2026 The strec Authors
// SPDX-License-Identifier: Apache-2.0

// Differentiable tensor operations. Every op returns a fresh contiguous
// tensor and records its backward pass when gradients are enabled.

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "strec/random.hpp"
#include "strec/tensor.hpp"

namespace strec::ops {

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
// x[..., n] + bias[n]
Tensor add_bias(const Tensor& x, const Tensor& bias);

Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);

Tensor reshape(const Tensor& x, Shape shape);
Tensor permute(const Tensor& x, const std::vector<int>& axes);

// a[M, K] * b[K, N]
Tensor matmul(const Tensor& a, const Tensor& b);
// x[..., K] * w[K, N] (+ bias[N]); bias may be undefined.
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& bias = {});
// Batched product: a[G, M, K] * b[G, K, N], or b[G, N, K] transposed.
Tensor bmm(const Tensor& a, const Tensor& b, bool transpose_b = false);
// m[P, Q] applied to each batch entry of x[B, Q, R] -> [B, P, R].
Tensor apply_left(const Tensor& m, const Tensor& x);

// Row-wise softmax of scores[G, n, m] + mask. `mask` holds `mask_groups`
// consecutive n x m blocks of additive values (0 or -inf); group g uses block
// g / (G / mask_groups). An empty mask means no masking. Fully masked rows
// produce all-zero weights.
Tensor masked_softmax(const Tensor& scores, std::span<const double> mask = {},
                      std::int64_t mask_groups = 1);
// Log-softmax over the last axis.
Tensor log_softmax(const Tensor& x);

// Normalizes the last axis, then applies gamma[d], beta[d].
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  double eps = 1e-5);

// x[N, C, H, W], w[O, C, kh, kw], bias[O] or undefined.
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& bias, int stride_h,
              int stride_w, int pad_h, int pad_w);

// Per-channel batch normalization of x[N, C, H, W]. In training mode the
// batch statistics are used and the running buffers are updated in place.
Tensor batch_norm2d(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                    Tensor& running_mean, Tensor& running_var, bool training,
                    double momentum = 0.1, double eps = 1e-5);

Tensor max_pool2x2(const Tensor& x);

// Bilinear border-clamped sampling; see kernels::grid_sample_forward.
Tensor grid_sample(const Tensor& x, const Tensor& grid);

// Inverted dropout; identity when !training or p == 0.
Tensor dropout(const Tensor& x, double p, bool training, Rng& rng);

// Rows of table[V, d] selected by indices -> [indices.size(), d].
Tensor embedding(const Tensor& table, std::span<const int> indices);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

}  // namespace strec::ops
