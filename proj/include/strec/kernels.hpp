// Copyright 2026 The strec Authors
// SPDX-License-Identifier: Apache-2.0

// Dense numeric kernels behind the differentiable ops.
//
// `strec::kernels` holds the OpenMP-parallel implementations used at run
// time. `strec::kernels::reference` holds straightforward serial versions
// with identical signatures; they exist for the kernel tests and the
// benchmark and are never called from the library itself.
//
// All backward kernels accumulate (+=) into their outputs. Parallel kernels
// assign every output element to exactly one thread and reduce in a fixed
// order, so results do not depend on the thread count.

#pragma once

#include <cstdint>

namespace strec::kernels {

// C = alpha * op(A) * op(B) + beta * C, row-major, op(X) = X or X^T.
void gemm(bool trans_a, bool trans_b, std::int64_t m, std::int64_t n, std::int64_t k,
          double alpha, const double* a, std::int64_t lda, const double* b,
          std::int64_t ldb, double beta, double* c, std::int64_t ldc);

struct ConvGeometry {
  std::int64_t batch = 1;
  std::int64_t in_channels = 1;
  std::int64_t in_h = 1;
  std::int64_t in_w = 1;
  std::int64_t out_channels = 1;
  std::int64_t kernel_h = 1;
  std::int64_t kernel_w = 1;
  std::int64_t stride_h = 1;
  std::int64_t stride_w = 1;
  std::int64_t pad_h = 0;
  std::int64_t pad_w = 0;

  std::int64_t out_h() const { return (in_h + 2 * pad_h - kernel_h) / stride_h + 1; }
  std::int64_t out_w() const { return (in_w + 2 * pad_w - kernel_w) / stride_w + 1; }
};

// x: [N, C, H, W], w: [O, C, kh, kw], bias: [O] or null, y: [N, O, Ho, Wo].
void conv2d_forward(const ConvGeometry& g, const double* x, const double* w,
                    const double* bias, double* y);
// Any of dx, dw, db may be null.
void conv2d_backward(const ConvGeometry& g, const double* x, const double* w,
                     const double* dy, double* dx, double* dw, double* db);

// Bilinear sampling with border clamping. Grid entries are (x, y) pairs in
// normalized [0,1] coordinates; pixel centres sit at (i + 0.5) / size.
struct SampleGeometry {
  std::int64_t batch = 1;
  std::int64_t channels = 1;
  std::int64_t in_h = 1;
  std::int64_t in_w = 1;
  std::int64_t out_h = 1;
  std::int64_t out_w = 1;
};

// x: [N, C, H, W], grid: [N, Ho, Wo, 2], y: [N, C, Ho, Wo].
void grid_sample_forward(const SampleGeometry& g, const double* x, const double* grid,
                         double* y);
void grid_sample_backward(const SampleGeometry& g, const double* x, const double* grid,
                          const double* dy, double* dx, double* dgrid);

// 2x2 stride-2 max pooling over `planes` independent HxW planes (floor mode).
// `argmax` receives the flat in-plane index of each winner.
void max_pool2x2_forward(std::int64_t planes, std::int64_t h, std::int64_t w,
                         const double* x, double* y, std::int64_t* argmax);
void max_pool2x2_backward(std::int64_t planes, std::int64_t h, std::int64_t w,
                          const double* dy, const std::int64_t* argmax, double* dx);

namespace reference {

void gemm(bool trans_a, bool trans_b, std::int64_t m, std::int64_t n, std::int64_t k,
          double alpha, const double* a, std::int64_t lda, const double* b,
          std::int64_t ldb, double beta, double* c, std::int64_t ldc);
void conv2d_forward(const ConvGeometry& g, const double* x, const double* w,
                    const double* bias, double* y);
void conv2d_backward(const ConvGeometry& g, const double* x, const double* w,
                     const double* dy, double* dx, double* dw, double* db);
void grid_sample_forward(const SampleGeometry& g, const double* x, const double* grid,
                         double* y);
void grid_sample_backward(const SampleGeometry& g, const double* x, const double* grid,
                          const double* dy, double* dx, double* dgrid);
void max_pool2x2_forward(std::int64_t planes, std::int64_t h, std::int64_t w,
                         const double* x, double* y, std::int64_t* argmax);
void max_pool2x2_backward(std::int64_t planes, std::int64_t h, std::int64_t w,
                          const double* dy, const std::int64_t* argmax, double* dx);

}  // namespace reference

// Number of OpenMP threads the parallel kernels will use (1 without OpenMP).
int max_threads();

}  // namespace strec::kernels
