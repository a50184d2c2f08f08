// Copyright 2026 The strec Authors
// SPDX-License-Identifier: Apache-2.0

// Serial reference kernels. Written for clarity; the only requirement is
// that they agree with the parallel kernels up to rounding.

#include <algorithm>
#include <cmath>

#include "strec/kernels.hpp"

namespace strec::kernels::reference {

namespace {

using i64 = std::int64_t;

double bilinear_value(const double* plane, i64 h, i64 w, double px, double py) {
  const i64 x0 = static_cast<i64>(std::floor(px));
  const i64 y0 = static_cast<i64>(std::floor(py));
  const i64 x1 = std::min(x0 + 1, w - 1);
  const i64 y1 = std::min(y0 + 1, h - 1);
  const double wx = px - static_cast<double>(x0);
  const double wy = py - static_cast<double>(y0);
  return (1 - wy) * (1 - wx) * plane[y0 * w + x0] + (1 - wy) * wx * plane[y0 * w + x1] +
         wy * (1 - wx) * plane[y1 * w + x0] + wy * wx * plane[y1 * w + x1];
}

double clamp_pixel(double u, i64 size, bool& inside) {
  const double p = u * static_cast<double>(size) - 0.5;
  const double hi = static_cast<double>(size - 1);
  inside = p > 0.0 && p < hi;
  return std::clamp(p, 0.0, hi);
}

}  // namespace

void gemm(bool trans_a, bool trans_b, i64 m, i64 n, i64 k, double alpha, const double* a,
          i64 lda, const double* b, i64 ldb, double beta, double* c, i64 ldc) {
  for (i64 i = 0; i < m; ++i) {
    for (i64 j = 0; j < n; ++j) {
      double s = 0.0;
      for (i64 p = 0; p < k; ++p) {
        const double av = trans_a ? a[p * lda + i] : a[i * lda + p];
        const double bv = trans_b ? b[j * ldb + p] : b[p * ldb + j];
        s += av * bv;
      }
      c[i * ldc + j] = (beta == 0.0 ? 0.0 : beta * c[i * ldc + j]) + alpha * s;
    }
  }
}

void conv2d_forward(const ConvGeometry& g, const double* x, const double* w,
                    const double* bias, double* y) {
  const i64 oh = g.out_h(), ow = g.out_w();
  for (i64 b = 0; b < g.batch; ++b)
    for (i64 o = 0; o < g.out_channels; ++o)
      for (i64 oy = 0; oy < oh; ++oy)
        for (i64 ox = 0; ox < ow; ++ox) {
          double s = bias ? bias[o] : 0.0;
          for (i64 c = 0; c < g.in_channels; ++c)
            for (i64 ki = 0; ki < g.kernel_h; ++ki)
              for (i64 kj = 0; kj < g.kernel_w; ++kj) {
                const i64 iy = oy * g.stride_h - g.pad_h + ki;
                const i64 ix = ox * g.stride_w - g.pad_w + kj;
                if (iy < 0 || iy >= g.in_h || ix < 0 || ix >= g.in_w) continue;
                s += w[((o * g.in_channels + c) * g.kernel_h + ki) * g.kernel_w + kj] *
                     x[((b * g.in_channels + c) * g.in_h + iy) * g.in_w + ix];
              }
          y[((b * g.out_channels + o) * oh + oy) * ow + ox] = s;
        }
}

void conv2d_backward(const ConvGeometry& g, const double* x, const double* w,
                     const double* dy, double* dx, double* dw, double* db) {
  const i64 oh = g.out_h(), ow = g.out_w();
  for (i64 b = 0; b < g.batch; ++b)
    for (i64 o = 0; o < g.out_channels; ++o)
      for (i64 oy = 0; oy < oh; ++oy)
        for (i64 ox = 0; ox < ow; ++ox) {
          const double d = dy[((b * g.out_channels + o) * oh + oy) * ow + ox];
          if (db) db[o] += d;
          for (i64 c = 0; c < g.in_channels; ++c)
            for (i64 ki = 0; ki < g.kernel_h; ++ki)
              for (i64 kj = 0; kj < g.kernel_w; ++kj) {
                const i64 iy = oy * g.stride_h - g.pad_h + ki;
                const i64 ix = ox * g.stride_w - g.pad_w + kj;
                if (iy < 0 || iy >= g.in_h || ix < 0 || ix >= g.in_w) continue;
                const i64 wi = ((o * g.in_channels + c) * g.kernel_h + ki) * g.kernel_w + kj;
                const i64 xi = ((b * g.in_channels + c) * g.in_h + iy) * g.in_w + ix;
                if (dw) dw[wi] += d * x[xi];
                if (dx) dx[xi] += d * w[wi];
              }
        }
}

void grid_sample_forward(const SampleGeometry& g, const double* x, const double* grid,
                         double* y) {
  for (i64 b = 0; b < g.batch; ++b)
    for (i64 c = 0; c < g.channels; ++c)
      for (i64 oy = 0; oy < g.out_h; ++oy)
        for (i64 ox = 0; ox < g.out_w; ++ox) {
          const double* gp = grid + ((b * g.out_h + oy) * g.out_w + ox) * 2;
          bool inside;
          const double px = clamp_pixel(gp[0], g.in_w, inside);
          const double py = clamp_pixel(gp[1], g.in_h, inside);
          const double* plane = x + (b * g.channels + c) * g.in_h * g.in_w;
          y[((b * g.channels + c) * g.out_h + oy) * g.out_w + ox] =
              bilinear_value(plane, g.in_h, g.in_w, px, py);
        }
}

void grid_sample_backward(const SampleGeometry& g, const double* x, const double* grid,
                          const double* dy, double* dx, double* dgrid) {
  for (i64 b = 0; b < g.batch; ++b)
    for (i64 c = 0; c < g.channels; ++c)
      for (i64 oy = 0; oy < g.out_h; ++oy)
        for (i64 ox = 0; ox < g.out_w; ++ox) {
          const double* gp = grid + ((b * g.out_h + oy) * g.out_w + ox) * 2;
          bool in_x, in_y;
          const double px = clamp_pixel(gp[0], g.in_w, in_x);
          const double py = clamp_pixel(gp[1], g.in_h, in_y);
          const i64 x0 = static_cast<i64>(std::floor(px));
          const i64 y0 = static_cast<i64>(std::floor(py));
          const i64 x1 = std::min(x0 + 1, g.in_w - 1);
          const i64 y1 = std::min(y0 + 1, g.in_h - 1);
          const double wx = px - static_cast<double>(x0);
          const double wy = py - static_cast<double>(y0);
          const double d = dy[((b * g.channels + c) * g.out_h + oy) * g.out_w + ox];
          const i64 base = (b * g.channels + c) * g.in_h * g.in_w;
          if (dx) {
            dx[base + y0 * g.in_w + x0] += d * (1 - wy) * (1 - wx);
            dx[base + y0 * g.in_w + x1] += d * (1 - wy) * wx;
            dx[base + y1 * g.in_w + x0] += d * wy * (1 - wx);
            dx[base + y1 * g.in_w + x1] += d * wy * wx;
          }
          if (dgrid) {
            const double* pl = x + base;
            const double v00 = pl[y0 * g.in_w + x0], v01 = pl[y0 * g.in_w + x1];
            const double v10 = pl[y1 * g.in_w + x0], v11 = pl[y1 * g.in_w + x1];
            const i64 gi = ((b * g.out_h + oy) * g.out_w + ox) * 2;
            if (in_x)
              dgrid[gi] += d * ((1 - wy) * (v01 - v00) + wy * (v11 - v10)) *
                           static_cast<double>(g.in_w);
            if (in_y)
              dgrid[gi + 1] += d * ((1 - wx) * (v10 - v00) + wx * (v11 - v01)) *
                               static_cast<double>(g.in_h);
          }
        }
}

void max_pool2x2_forward(i64 planes, i64 h, i64 w, const double* x, double* y,
                         i64* argmax) {
  const i64 oh = h / 2, ow = w / 2;
  for (i64 pl = 0; pl < planes; ++pl)
    for (i64 oy = 0; oy < oh; ++oy)
      for (i64 ox = 0; ox < ow; ++ox) {
        i64 best = -1;
        for (i64 dy = 0; dy < 2; ++dy)
          for (i64 dxx = 0; dxx < 2; ++dxx) {
            const i64 idx = (2 * oy + dy) * w + 2 * ox + dxx;
            if (best < 0 || x[pl * h * w + idx] > x[pl * h * w + best]) best = idx;
          }
        y[pl * oh * ow + oy * ow + ox] = x[pl * h * w + best];
        argmax[pl * oh * ow + oy * ow + ox] = best;
      }
}

void max_pool2x2_backward(i64 planes, i64 h, i64 w, const double* dy, const i64* argmax,
                          double* dx) {
  const i64 oh = h / 2, ow = w / 2;
  for (i64 i = 0; i < planes * oh * ow; ++i) {
    const i64 pl = i / (oh * ow);
    dx[pl * h * w + argmax[i]] += dy[i];
  }
}

}  // namespace strec::kernels::reference
