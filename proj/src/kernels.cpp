// Copyright 2026 The strec Authors
// SPDX-License-Identifier: Apache-2.0

#include "strec/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace strec::kernels {

namespace {

using i64 = std::int64_t;

constexpr i64 kColumnBlock = 512;
constexpr i64 kParallelWork = 1 << 14;

double dot(const double* a, const double* b, i64 n) {
  double s = 0.0;
#pragma omp simd reduction(+ : s)
  for (i64 p = 0; p < n; ++p) s += a[p] * b[p];
  return s;
}

void scale_rows(i64 rows, i64 n, double beta, double* c, i64 ldc) {
  for (i64 r = 0; r < rows; ++r) {
    double* row = c + r * ldc;
    if (beta == 0.0) {
      std::fill(row, row + n, 0.0);
    } else if (beta != 1.0) {
      for (i64 j = 0; j < n; ++j) row[j] *= beta;
    }
  }
}

// Rows [i0, i0 + rows) of C += alpha * A * B with A row-major (lda), B
// row-major (ldb). Four rows share each streamed row of B.
void gemm_row_block(i64 i0, i64 rows, i64 n, i64 k, double alpha, const double* a,
                    i64 lda, const double* b, i64 ldb, double* c, i64 ldc) {
  for (i64 j0 = 0; j0 < n; j0 += kColumnBlock) {
    const i64 jn = std::min(kColumnBlock, n - j0);
    for (i64 p = 0; p < k; ++p) {
      const double* brow = b + p * ldb + j0;
      if (rows == 4) {
        const double a0 = alpha * a[(i0 + 0) * lda + p];
        const double a1 = alpha * a[(i0 + 1) * lda + p];
        const double a2 = alpha * a[(i0 + 2) * lda + p];
        const double a3 = alpha * a[(i0 + 3) * lda + p];
        double* c0 = c + (i0 + 0) * ldc + j0;
        double* c1 = c + (i0 + 1) * ldc + j0;
        double* c2 = c + (i0 + 2) * ldc + j0;
        double* c3 = c + (i0 + 3) * ldc + j0;
#pragma omp simd
        for (i64 j = 0; j < jn; ++j) {
          const double bj = brow[j];
          c0[j] += a0 * bj;
          c1[j] += a1 * bj;
          c2[j] += a2 * bj;
          c3[j] += a3 * bj;
        }
      } else {
        for (i64 r = 0; r < rows; ++r) {
          const double ar = alpha * a[(i0 + r) * lda + p];
          double* cr = c + (i0 + r) * ldc + j0;
#pragma omp simd
          for (i64 j = 0; j < jn; ++j) cr[j] += ar * brow[j];
        }
      }
    }
  }
}

void im2col(const ConvGeometry& g, const double* x, double* col) {
  const i64 oh = g.out_h(), ow = g.out_w();
  for (i64 c = 0; c < g.in_channels; ++c) {
    const double* plane = x + c * g.in_h * g.in_w;
    for (i64 ki = 0; ki < g.kernel_h; ++ki) {
      for (i64 kj = 0; kj < g.kernel_w; ++kj) {
        double* row = col + ((c * g.kernel_h + ki) * g.kernel_w + kj) * oh * ow;
        for (i64 oy = 0; oy < oh; ++oy) {
          const i64 iy = oy * g.stride_h - g.pad_h + ki;
          double* dst = row + oy * ow;
          if (iy < 0 || iy >= g.in_h) {
            std::fill(dst, dst + ow, 0.0);
            continue;
          }
          const double* src = plane + iy * g.in_w;
          for (i64 ox = 0; ox < ow; ++ox) {
            const i64 ix = ox * g.stride_w - g.pad_w + kj;
            dst[ox] = (ix >= 0 && ix < g.in_w) ? src[ix] : 0.0;
          }
        }
      }
    }
  }
}

void col2im_add(const ConvGeometry& g, const double* col, double* x) {
  const i64 oh = g.out_h(), ow = g.out_w();
  for (i64 c = 0; c < g.in_channels; ++c) {
    double* plane = x + c * g.in_h * g.in_w;
    for (i64 ki = 0; ki < g.kernel_h; ++ki) {
      for (i64 kj = 0; kj < g.kernel_w; ++kj) {
        const double* row = col + ((c * g.kernel_h + ki) * g.kernel_w + kj) * oh * ow;
        for (i64 oy = 0; oy < oh; ++oy) {
          const i64 iy = oy * g.stride_h - g.pad_h + ki;
          if (iy < 0 || iy >= g.in_h) continue;
          const double* src = row + oy * ow;
          double* dst = plane + iy * g.in_w;
          for (i64 ox = 0; ox < ow; ++ox) {
            const i64 ix = ox * g.stride_w - g.pad_w + kj;
            if (ix >= 0 && ix < g.in_w) dst[ix] += src[ox];
          }
        }
      }
    }
  }
}

bool is_pointwise(const ConvGeometry& g) {
  return g.kernel_h == 1 && g.kernel_w == 1 && g.stride_h == 1 && g.stride_w == 1 &&
         g.pad_h == 0 && g.pad_w == 0;
}

// Normalized coordinate -> clamped pixel coordinate, plus d(pixel)/d(coord).
inline void source_pixel(double u, i64 size, double& pixel, double& slope) {
  pixel = u * static_cast<double>(size) - 0.5;
  slope = static_cast<double>(size);
  const double hi = static_cast<double>(size - 1);
  if (pixel <= 0.0) {
    pixel = 0.0;
    slope = 0.0;
  } else if (pixel >= hi) {
    pixel = hi;
    slope = 0.0;
  }
}

struct BilinearTap {
  i64 x0, x1, y0, y1;
  double wx, wy;
  double slope_x, slope_y;
};

inline BilinearTap make_tap(double gx, double gy, i64 h, i64 w) {
  BilinearTap t{};
  double px, py;
  source_pixel(gx, w, px, t.slope_x);
  source_pixel(gy, h, py, t.slope_y);
  t.x0 = static_cast<i64>(std::floor(px));
  t.y0 = static_cast<i64>(std::floor(py));
  t.x1 = std::min(t.x0 + 1, w - 1);
  t.y1 = std::min(t.y0 + 1, h - 1);
  t.wx = px - static_cast<double>(t.x0);
  t.wy = py - static_cast<double>(t.y0);
  return t;
}

}  // namespace

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

void gemm(bool trans_a, bool trans_b, i64 m, i64 n, i64 k, double alpha, const double* a,
          i64 lda, const double* b, i64 ldb, double beta, double* c, i64 ldc) {
  if (m == 0 || n == 0) return;
  std::vector<double> a_packed;
  if (trans_a) {
    a_packed.resize(static_cast<std::size_t>(m * k));
    for (i64 p = 0; p < k; ++p)
      for (i64 i = 0; i < m; ++i) a_packed[i * k + p] = a[p * lda + i];
    a = a_packed.data();
    lda = k;
  }
  const bool parallel = m * n * k >= kParallelWork && m > 1;
  if (trans_b) {
    // op(B) = B^T: C[i, j] = dot(A row i, B row j).
#pragma omp parallel for schedule(static) if (parallel)
    for (i64 i = 0; i < m; ++i) {
      double* crow = c + i * ldc;
      for (i64 j = 0; j < n; ++j) {
        const double s = alpha * dot(a + i * lda, b + j * ldb, k);
        crow[j] = (beta == 0.0 ? 0.0 : beta * crow[j]) + s;
      }
    }
    return;
  }
  const i64 blocks = (m + 3) / 4;
#pragma omp parallel for schedule(static) if (parallel)
  for (i64 blk = 0; blk < blocks; ++blk) {
    const i64 i0 = blk * 4;
    const i64 rows = std::min<i64>(4, m - i0);
    scale_rows(rows, n, beta, c + i0 * ldc, ldc);
    gemm_row_block(i0, rows, n, k, alpha, a, lda, b, ldb, c, ldc);
  }
}

void conv2d_forward(const ConvGeometry& g, const double* x, const double* w,
                    const double* bias, double* y) {
  const i64 oh = g.out_h(), ow = g.out_w();
  const i64 ckk = g.in_channels * g.kernel_h * g.kernel_w;
  const i64 in_plane = g.in_channels * g.in_h * g.in_w;
  const i64 out_plane = g.out_channels * oh * ow;
  const bool pointwise = is_pointwise(g);
  const bool outer = g.batch >= max_threads() && g.batch > 1;
#pragma omp parallel if (outer)
  {
    std::vector<double> col(pointwise ? 0 : static_cast<std::size_t>(ckk * oh * ow));
#pragma omp for schedule(static)
    for (i64 b = 0; b < g.batch; ++b) {
      const double* xb = x + b * in_plane;
      double* yb = y + b * out_plane;
      const double* src = xb;
      if (!pointwise) {
        im2col(g, xb, col.data());
        src = col.data();
      }
      for (i64 o = 0; o < g.out_channels; ++o) {
        std::fill(yb + o * oh * ow, yb + (o + 1) * oh * ow, bias ? bias[o] : 0.0);
      }
      gemm(false, false, g.out_channels, oh * ow, ckk, 1.0, w, ckk, src, oh * ow, 1.0,
           yb, oh * ow);
    }
  }
}

void conv2d_backward(const ConvGeometry& g, const double* x, const double* w,
                     const double* dy, double* dx, double* dw, double* db) {
  const i64 oh = g.out_h(), ow = g.out_w();
  const i64 ckk = g.in_channels * g.kernel_h * g.kernel_w;
  const i64 in_plane = g.in_channels * g.in_h * g.in_w;
  const i64 out_plane = g.out_channels * oh * ow;
  const bool pointwise = is_pointwise(g);

  if (db) {
#pragma omp parallel for schedule(static) if (g.out_channels > 1 && g.batch * out_plane >= kParallelWork)
    for (i64 o = 0; o < g.out_channels; ++o) {
      double s = 0.0;
      for (i64 b = 0; b < g.batch; ++b) {
        const double* d = dy + b * out_plane + o * oh * ow;
        for (i64 p = 0; p < oh * ow; ++p) s += d[p];
      }
      db[o] += s;
    }
  }

  std::vector<double> col(pointwise ? 0 : static_cast<std::size_t>(ckk * oh * ow));
  std::vector<double> dcol(pointwise ? 0 : static_cast<std::size_t>(ckk * oh * ow));
  for (i64 b = 0; b < g.batch; ++b) {
    const double* xb = x + b * in_plane;
    const double* dyb = dy + b * out_plane;
    if (dw) {
      const double* src = xb;
      if (!pointwise) {
        im2col(g, xb, col.data());
        src = col.data();
      }
      gemm(false, true, g.out_channels, ckk, oh * ow, 1.0, dyb, oh * ow, src, oh * ow, 1.0,
           dw, ckk);
    }
    if (dx) {
      double* dxb = dx + b * in_plane;
      if (pointwise) {
        gemm(true, false, ckk, oh * ow, g.out_channels, 1.0, w, ckk, dyb, oh * ow, 1.0,
             dxb, oh * ow);
      } else {
        gemm(true, false, ckk, oh * ow, g.out_channels, 1.0, w, ckk, dyb, oh * ow, 0.0,
             dcol.data(), oh * ow);
        col2im_add(g, dcol.data(), dxb);
      }
    }
  }
}

void grid_sample_forward(const SampleGeometry& g, const double* x, const double* grid,
                         double* y) {
  const i64 in_plane = g.in_h * g.in_w;
  const i64 out_plane = g.out_h * g.out_w;
  const i64 rows = g.batch * g.out_h;
#pragma omp parallel for schedule(static) if (rows * g.out_w * g.channels >= kParallelWork)
  for (i64 r = 0; r < rows; ++r) {
    const i64 b = r / g.out_h;
    const i64 oy = r % g.out_h;
    for (i64 ox = 0; ox < g.out_w; ++ox) {
      const double* gp = grid + ((b * g.out_h + oy) * g.out_w + ox) * 2;
      const BilinearTap t = make_tap(gp[0], gp[1], g.in_h, g.in_w);
      for (i64 c = 0; c < g.channels; ++c) {
        const double* plane = x + (b * g.channels + c) * in_plane;
        const double v00 = plane[t.y0 * g.in_w + t.x0];
        const double v01 = plane[t.y0 * g.in_w + t.x1];
        const double v10 = plane[t.y1 * g.in_w + t.x0];
        const double v11 = plane[t.y1 * g.in_w + t.x1];
        y[(b * g.channels + c) * out_plane + oy * g.out_w + ox] =
            (1.0 - t.wy) * ((1.0 - t.wx) * v00 + t.wx * v01) +
            t.wy * ((1.0 - t.wx) * v10 + t.wx * v11);
      }
    }
  }
}

void grid_sample_backward(const SampleGeometry& g, const double* x, const double* grid,
                          const double* dy, double* dx, double* dgrid) {
  const i64 in_plane = g.in_h * g.in_w;
  const i64 out_plane = g.out_h * g.out_w;
  const bool parallel = g.batch * g.channels * out_plane >= kParallelWork;
  if (dx) {
    // Scatter is owned per (batch, channel) plane.
#pragma omp parallel for schedule(static) if (parallel)
    for (i64 bc = 0; bc < g.batch * g.channels; ++bc) {
      const i64 b = bc / g.channels;
      double* plane = dx + bc * in_plane;
      const double* d = dy + bc * out_plane;
      for (i64 p = 0; p < out_plane; ++p) {
        const double* gp = grid + (b * out_plane + p) * 2;
        const BilinearTap t = make_tap(gp[0], gp[1], g.in_h, g.in_w);
        const double gv = d[p];
        plane[t.y0 * g.in_w + t.x0] += gv * (1.0 - t.wy) * (1.0 - t.wx);
        plane[t.y0 * g.in_w + t.x1] += gv * (1.0 - t.wy) * t.wx;
        plane[t.y1 * g.in_w + t.x0] += gv * t.wy * (1.0 - t.wx);
        plane[t.y1 * g.in_w + t.x1] += gv * t.wy * t.wx;
      }
    }
  }
  if (dgrid) {
#pragma omp parallel for schedule(static) if (parallel)
    for (i64 bp = 0; bp < g.batch * out_plane; ++bp) {
      const i64 b = bp / out_plane;
      const i64 p = bp % out_plane;
      const double* gp = grid + bp * 2;
      const BilinearTap t = make_tap(gp[0], gp[1], g.in_h, g.in_w);
      double sx = 0.0, sy = 0.0;
      for (i64 c = 0; c < g.channels; ++c) {
        const double* plane = x + (b * g.channels + c) * in_plane;
        const double v00 = plane[t.y0 * g.in_w + t.x0];
        const double v01 = plane[t.y0 * g.in_w + t.x1];
        const double v10 = plane[t.y1 * g.in_w + t.x0];
        const double v11 = plane[t.y1 * g.in_w + t.x1];
        const double gv = dy[(b * g.channels + c) * out_plane + p];
        sx += gv * ((1.0 - t.wy) * (v01 - v00) + t.wy * (v11 - v10));
        sy += gv * ((1.0 - t.wx) * (v10 - v00) + t.wx * (v11 - v01));
      }
      dgrid[bp * 2 + 0] += sx * t.slope_x;
      dgrid[bp * 2 + 1] += sy * t.slope_y;
    }
  }
}

void max_pool2x2_forward(i64 planes, i64 h, i64 w, const double* x, double* y,
                         i64* argmax) {
  const i64 oh = h / 2, ow = w / 2;
#pragma omp parallel for schedule(static) if (planes * h * w >= kParallelWork)
  for (i64 pl = 0; pl < planes; ++pl) {
    const double* src = x + pl * h * w;
    for (i64 oy = 0; oy < oh; ++oy) {
      for (i64 ox = 0; ox < ow; ++ox) {
        i64 best = (2 * oy) * w + 2 * ox;
        for (i64 dy = 0; dy < 2; ++dy)
          for (i64 dxx = 0; dxx < 2; ++dxx) {
            const i64 idx = (2 * oy + dy) * w + 2 * ox + dxx;
            if (src[idx] > src[best]) best = idx;
          }
        const i64 o = pl * oh * ow + oy * ow + ox;
        y[o] = src[best];
        argmax[o] = best;
      }
    }
  }
}

void max_pool2x2_backward(i64 planes, i64 h, i64 w, const double* dy, const i64* argmax,
                          double* dx) {
  const i64 oh = h / 2, ow = w / 2;
#pragma omp parallel for schedule(static) if (planes * h * w >= kParallelWork)
  for (i64 pl = 0; pl < planes; ++pl) {
    for (i64 o = 0; o < oh * ow; ++o) {
      const i64 flat = pl * oh * ow + o;
      dx[pl * h * w + argmax[flat]] += dy[flat];
    }
  }
}

}  // namespace strec::kernels
