// Copyright 2026 The strec Authors
// SPDX-License-Identifier: Apache-2.0

#include "strec/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>

#include "strec/errors.hpp"
#include "strec/kernels.hpp"

namespace strec::ops {

namespace {

using i64 = std::int64_t;
using Values = std::vector<double>;

template <typename Fn>
void with_grad(Tensor& t, Fn&& fn) {
  if (t.requires_grad()) fn(t.grad_buffer());
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(what) + ": shapes " + shape_to_string(a.shape()) +
                     " and " + shape_to_string(b.shape()) + " differ");
  }
}

void require_rank(const Tensor& t, int rank, const char* what) {
  if (t.ndim() != rank) {
    throw ShapeError(std::string(what) + ": expected rank " + std::to_string(rank) +
                     ", got " + shape_to_string(t.shape()));
  }
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  Values out(a.data().begin(), a.data().end());
  auto bd = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bd[i];
  return Tensor::make_result(
      a.shape(), std::move(out), {a, b},
      [](std::span<const double> g, std::span<const double>, std::vector<Tensor>& in) {
        for (auto& t : in)
          with_grad(t, [&](std::span<double> gt) {
            for (std::size_t i = 0; i < g.size(); ++i) gt[i] += g[i];
          });
      },
      "add");
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  Values out(a.data().begin(), a.data().end());
  auto bd = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bd[i];
  return Tensor::make_result(
      a.shape(), std::move(out), {a, b},
      [](std::span<const double> g, std::span<const double>, std::vector<Tensor>& in) {
        with_grad(in[0], [&](std::span<double> gt) {
          for (std::size_t i = 0; i < g.size(); ++i) gt[i] += g[i];
        });
        with_grad(in[1], [&](std::span<double> gt) {
          for (std::size_t i = 0; i < g.size(); ++i) gt[i] -= g[i];
        });
      },
      "sub");
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  Values out(a.data().begin(), a.data().end());
  auto bd = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bd[i];
  return Tensor::make_result(
      a.shape(), std::move(out), {a, b},
      [](std::span<const double> g, std::span<const double>, std::vector<Tensor>& in) {
        auto ad = in[0].data();
        auto bd = in[1].data();
        with_grad(in[0], [&](std::span<double> gt) {
          for (std::size_t i = 0; i < g.size(); ++i) gt[i] += g[i] * bd[i];
        });
        with_grad(in[1], [&](std::span<double> gt) {
          for (std::size_t i = 0; i < g.size(); ++i) gt[i] += g[i] * ad[i];
        });
      },
      "mul");
}

Tensor scale(const Tensor& a, double factor) {
  Values out(a.data().begin(), a.data().end());
  for (auto& v : out) v *= factor;
  return Tensor::make_result(
      a.shape(), std::move(out), {a},
      [factor](std::span<const double> g, std::span<const double>, std::vector<Tensor>& in) {
        with_grad(in[0], [&](std::span<double> gt) {
          for (std::size_t i = 0; i < g.size(); ++i) gt[i] += factor * g[i];
        });
      },
      "scale");
}

Tensor add_bias(const Tensor& x, const Tensor& bias) {
  require_rank(bias, 1, "add_bias");
  const i64 n = bias.dim(0);
  if (x.ndim() == 0 || x.dim(-1) != n) throw ShapeError("add_bias: trailing dimension mismatch");
  Values out(x.data().begin(), x.data().end());
  auto bd = bias.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bd[i % static_cast<std::size_t>(n)];
  return Tensor::make_result(
      x.shape(), std::move(out), {x, bias},
      [n](std::span<const double> g, std::span<const double>, std::vector<Tensor>& in) {
        with_grad(in[0], [&](std::span<double> gt) {
          for (std::size_t i = 0; i < g.size(); ++i) gt[i] += g[i];
        });
        with_grad(in[1], [&](std::span<double> gt) {
          for (std::size_t i = 0; i < g.size(); ++i) gt[i % static_cast<std::size_t>(n)] += g[i];
        });
      },
      "add_bias");
}

Tensor relu(const Tensor& x) {
  Values out(x.data().begin(), x.data().end());
  for (auto& v : out) v = v > 0.0 ? v : 0.0;
  return Tensor::make_result(
      x.shape(), std::move(out), {x},
      [](std::span<const double> g, std::span<const double> y, std::vector<Tensor>& in) {
        with_grad(in[0], [&](std::span<double> gt) {
          for (std::size_t i = 0; i < g.size(); ++i)
            if (y[i] > 0.0) gt[i] += g[i];
        });
      },
      "relu");
}

Tensor sigmoid(const Tensor& x) {
  Values out(x.data().begin(), x.data().end());
  for (auto& v : out) v = 1.0 / (1.0 + std::exp(-v));
  return Tensor::make_result(
      x.shape(), std::move(out), {x},
      [](std::span<const double> g, std::span<const double> y, std::vector<Tensor>& in) {
        with_grad(in[0], [&](std::span<double> gt) {
          for (std::size_t i = 0; i < g.size(); ++i) gt[i] += g[i] * y[i] * (1.0 - y[i]);
        });
      },
      "sigmoid");
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_numel(shape) != x.numel()) {
    throw ShapeError("reshape: " + shape_to_string(x.shape()) + " -> " +
                     shape_to_string(shape));
  }
  return Tensor::make_result(
      std::move(shape), x.to_vector(), {x},
      [](std::span<const double> g, std::span<const double>, std::vector<Tensor>& in) {
        with_grad(in[0], [&](std::span<double> gt) {
          for (std::size_t i = 0; i < g.size(); ++i) gt[i] += g[i];
        });
      },
      "reshape");
}

Tensor permute(const Tensor& x, const std::vector<int>& axes) {
  const int rank = x.ndim();
  if (static_cast<int>(axes.size()) != rank) throw ShapeError("permute: wrong axis count");
  std::vector<bool> seen(static_cast<std::size_t>(rank), false);
  Shape out_shape(static_cast<std::size_t>(rank));
  for (int i = 0; i < rank; ++i) {
    const int a = axes[static_cast<std::size_t>(i)];
    if (a < 0 || a >= rank || seen[static_cast<std::size_t>(a)])
      throw ShapeError("permute: invalid axes");
    seen[static_cast<std::size_t>(a)] = true;
    out_shape[static_cast<std::size_t>(i)] = x.dim(a);
  }
  std::vector<i64> in_stride(static_cast<std::size_t>(rank), 1);
  for (int i = rank - 2; i >= 0; --i)
    in_stride[static_cast<std::size_t>(i)] =
        in_stride[static_cast<std::size_t>(i + 1)] * x.dim(i + 1);
  // For each output element, the flat index of its source.
  const i64 n = x.numel();
  auto source = std::make_shared<std::vector<i64>>(static_cast<std::size_t>(n));
  std::vector<i64> idx(static_cast<std::size_t>(rank), 0);
  for (i64 o = 0; o < n; ++o) {
    i64 s = 0;
    for (int i = 0; i < rank; ++i)
      s += idx[static_cast<std::size_t>(i)] *
           in_stride[static_cast<std::size_t>(axes[static_cast<std::size_t>(i)])];
    (*source)[static_cast<std::size_t>(o)] = s;
    for (int i = rank - 1; i >= 0; --i) {
      if (++idx[static_cast<std::size_t>(i)] < out_shape[static_cast<std::size_t>(i)]) break;
      idx[static_cast<std::size_t>(i)] = 0;
    }
  }
  Values out(static_cast<std::size_t>(n));
  auto xd = x.data();
  for (i64 o = 0; o < n; ++o) out[static_cast<std::size_t>(o)] = xd[static_cast<std::size_t>((*source)[static_cast<std::size_t>(o)])];
  return Tensor::make_result(
      std::move(out_shape), std::move(out), {x},
      [source](std::span<const double> g, std::span<const double>, std::vector<Tensor>& in) {
        with_grad(in[0], [&](std::span<double> gt) {
          for (std::size_t o = 0; o < g.size(); ++o) gt[static_cast<std::size_t>((*source)[o])] += g[o];
        });
      },
      "permute");
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank(a, 2, "matmul");
  require_rank(b, 2, "matmul");
  const i64 m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k) {
    throw ShapeError("matmul: " + shape_to_string(a.shape()) + " x " +
                     shape_to_string(b.shape()));
  }
  Values out(static_cast<std::size_t>(m * n));
  kernels::gemm(false, false, m, n, k, 1.0, a.data().data(), k, b.data().data(), n, 0.0,
                out.data(), n);
  return Tensor::make_result(
      {m, n}, std::move(out), {a, b},
      [m, k, n](std::span<const double> g, std::span<const double>, std::vector<Tensor>& in) {
        auto ad = in[0].data();
        auto bd = in[1].data();
        with_grad(in[0], [&](std::span<double> ga) {
          kernels::gemm(false, true, m, k, n, 1.0, g.data(), n, bd.data(), n, 1.0, ga.data(), k);
        });
        with_grad(in[1], [&](std::span<double> gb) {
          kernels::gemm(true, false, k, n, m, 1.0, ad.data(), k, g.data(), n, 1.0, gb.data(), n);
        });
      },
      "matmul");
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& bias) {
  require_rank(w, 2, "linear");
  const i64 k = w.dim(0), n = w.dim(1);
  if (x.ndim() < 1 || x.dim(-1) != k) {
    throw ShapeError("linear: input " + shape_to_string(x.shape()) + " vs weight " +
                     shape_to_string(w.shape()));
  }
  if (bias.defined()) require_shape(bias, {n}, "linear bias");
  const i64 rows = x.numel() / k;
  Shape out_shape = x.shape();
  out_shape.back() = n;
  Values out(static_cast<std::size_t>(rows * n));
  if (bias.defined()) {
    auto bd = bias.data();
    for (i64 r = 0; r < rows; ++r) std::copy(bd.begin(), bd.end(), out.begin() + r * n);
  }
  kernels::gemm(false, false, rows, n, k, 1.0, x.data().data(), k, w.data().data(), n,
                bias.defined() ? 1.0 : 0.0, out.data(), n);
  std::vector<Tensor> inputs{x, w};
  if (bias.defined()) inputs.push_back(bias);
  return Tensor::make_result(
      std::move(out_shape), std::move(out), std::move(inputs),
      [rows, k, n](std::span<const double> g, std::span<const double>, std::vector<Tensor>& in) {
        auto xd = in[0].data();
        auto wd = in[1].data();
        with_grad(in[0], [&](std::span<double> gx) {
          kernels::gemm(false, true, rows, k, n, 1.0, g.data(), n, wd.data(), n, 1.0, gx.data(), k);
        });
        with_grad(in[1], [&](std::span<double> gw) {
          kernels::gemm(true, false, k, n, rows, 1.0, xd.data(), k, g.data(), n, 1.0, gw.data(), n);
        });
        if (in.size() > 2) {
          with_grad(in[2], [&](std::span<double> gb) {
            for (i64 r = 0; r < rows; ++r)
              for (i64 j = 0; j < n; ++j) gb[static_cast<std::size_t>(j)] += g[static_cast<std::size_t>(r * n + j)];
          });
        }
      },
      "linear");
}

Tensor bmm(const Tensor& a, const Tensor& b, bool transpose_b) {
  require_rank(a, 3, "bmm");
  require_rank(b, 3, "bmm");
  const i64 groups = a.dim(0), m = a.dim(1), k = a.dim(2);
  const i64 n = transpose_b ? b.dim(1) : b.dim(2);
  const i64 bk = transpose_b ? b.dim(2) : b.dim(1);
  if (b.dim(0) != groups || bk != k) {
    throw ShapeError("bmm: " + shape_to_string(a.shape()) + " x " + shape_to_string(b.shape()));
  }
  Values out(static_cast<std::size_t>(groups * m * n));
  auto ad = a.data();
  auto bd = b.data();
  for (i64 gi = 0; gi < groups; ++gi) {
    kernels::gemm(false, transpose_b, m, n, k, 1.0, ad.data() + gi * m * k, k,
                  bd.data() + gi * k * n, transpose_b ? k : n, 0.0, out.data() + gi * m * n, n);
  }
  return Tensor::make_result(
      {groups, m, n}, std::move(out), {a, b},
      [groups, m, n, k, transpose_b](std::span<const double> g, std::span<const double>,
                                     std::vector<Tensor>& in) {
        auto ad = in[0].data();
        auto bd = in[1].data();
        for (i64 gi = 0; gi < groups; ++gi) {
          const double* gg = g.data() + gi * m * n;
          const double* ag = ad.data() + gi * m * k;
          const double* bg = bd.data() + gi * k * n;
          with_grad(in[0], [&](std::span<double> ga) {
            // dA = dC * op(B)^T
            if (transpose_b)
              kernels::gemm(false, false, m, k, n, 1.0, gg, n, bg, k, 1.0, ga.data() + gi * m * k, k);
            else
              kernels::gemm(false, true, m, k, n, 1.0, gg, n, bg, n, 1.0, ga.data() + gi * m * k, k);
          });
          with_grad(in[1], [&](std::span<double> gb) {
            if (transpose_b)  // dB[N,K] = dC^T * A
              kernels::gemm(true, false, n, k, m, 1.0, gg, n, ag, k, 1.0, gb.data() + gi * k * n, k);
            else  // dB[K,N] = A^T * dC
              kernels::gemm(true, false, k, n, m, 1.0, ag, k, gg, n, 1.0, gb.data() + gi * k * n, n);
          });
        }
      },
      "bmm");
}

Tensor apply_left(const Tensor& m, const Tensor& x) {
  require_rank(m, 2, "apply_left");
  require_rank(x, 3, "apply_left");
  const i64 p = m.dim(0), q = m.dim(1), batch = x.dim(0), r = x.dim(2);
  if (x.dim(1) != q) {
    throw ShapeError("apply_left: " + shape_to_string(m.shape()) + " x " +
                     shape_to_string(x.shape()));
  }
  Values out(static_cast<std::size_t>(batch * p * r));
  for (i64 b = 0; b < batch; ++b) {
    kernels::gemm(false, false, p, r, q, 1.0, m.data().data(), q, x.data().data() + b * q * r,
                  r, 0.0, out.data() + b * p * r, r);
  }
  return Tensor::make_result(
      {batch, p, r}, std::move(out), {m, x},
      [p, q, r, batch](std::span<const double> g, std::span<const double>, std::vector<Tensor>& in) {
        auto md = in[0].data();
        auto xd = in[1].data();
        for (i64 b = 0; b < batch; ++b) {
          const double* gb = g.data() + b * p * r;
          with_grad(in[0], [&](std::span<double> gm) {
            kernels::gemm(false, true, p, q, r, 1.0, gb, r, xd.data() + b * q * r, r, 1.0,
                          gm.data(), q);
          });
          with_grad(in[1], [&](std::span<double> gx) {
            kernels::gemm(true, false, q, r, p, 1.0, md.data(), q, gb, r, 1.0,
                          gx.data() + b * q * r, r);
          });
        }
      },
      "apply_left");
}

Tensor masked_softmax(const Tensor& scores, std::span<const double> mask, i64 mask_groups) {
  require_rank(scores, 3, "masked_softmax");
  const i64 groups = scores.dim(0), n = scores.dim(1), m = scores.dim(2);
  const bool masked = !mask.empty();
  if (masked) {
    if (mask_groups <= 0 || groups % mask_groups != 0 ||
        static_cast<i64>(mask.size()) != mask_groups * n * m) {
      throw ShapeError("masked_softmax: mask does not match scores " +
                       shape_to_string(scores.shape()));
    }
  }
  const i64 per_mask = masked ? groups / mask_groups : 1;
  Values out(static_cast<std::size_t>(groups * n * m));
  auto sd = scores.data();
  for (i64 gi = 0; gi < groups; ++gi) {
    const double* mk = masked ? mask.data() + (gi / per_mask) * n * m : nullptr;
    for (i64 i = 0; i < n; ++i) {
      const double* row = sd.data() + (gi * n + i) * m;
      double* dst = out.data() + (gi * n + i) * m;
      double mx = -std::numeric_limits<double>::infinity();
      for (i64 j = 0; j < m; ++j) {
        dst[j] = row[j] + (mk ? mk[i * m + j] : 0.0);
        mx = std::max(mx, dst[j]);
      }
      if (mx == -std::numeric_limits<double>::infinity()) {
        std::fill(dst, dst + m, 0.0);
        continue;
      }
      double total = 0.0;
      for (i64 j = 0; j < m; ++j) {
        dst[j] = std::exp(dst[j] - mx);
        total += dst[j];
      }
      for (i64 j = 0; j < m; ++j) dst[j] /= total;
    }
  }
  return Tensor::make_result(
      scores.shape(), std::move(out), {scores},
      [m](std::span<const double> g, std::span<const double> y, std::vector<Tensor>& in) {
        with_grad(in[0], [&](std::span<double> gs) {
          const std::size_t rows = g.size() / static_cast<std::size_t>(m);
          for (std::size_t r = 0; r < rows; ++r) {
            const std::size_t base = r * static_cast<std::size_t>(m);
            double dotp = 0.0;
            for (i64 j = 0; j < m; ++j) dotp += g[base + j] * y[base + j];
            for (i64 j = 0; j < m; ++j) gs[base + j] += y[base + j] * (g[base + j] - dotp);
          }
        });
      },
      "masked_softmax");
}

Tensor log_softmax(const Tensor& x) {
  if (x.ndim() < 1) throw ShapeError("log_softmax: scalar input");
  const i64 m = x.dim(-1);
  const i64 rows = x.numel() / m;
  Values out(static_cast<std::size_t>(x.numel()));
  auto xd = x.data();
  for (i64 r = 0; r < rows; ++r) {
    const double* row = xd.data() + r * m;
    const double mx = *std::max_element(row, row + m);
    double total = 0.0;
    for (i64 j = 0; j < m; ++j) total += std::exp(row[j] - mx);
    const double lse = mx + std::log(total);
    for (i64 j = 0; j < m; ++j) out[static_cast<std::size_t>(r * m + j)] = row[j] - lse;
  }
  return Tensor::make_result(
      x.shape(), std::move(out), {x},
      [m, rows](std::span<const double> g, std::span<const double> y, std::vector<Tensor>& in) {
        with_grad(in[0], [&](std::span<double> gx) {
          for (i64 r = 0; r < rows; ++r) {
            double total = 0.0;
            for (i64 j = 0; j < m; ++j) total += g[static_cast<std::size_t>(r * m + j)];
            for (i64 j = 0; j < m; ++j) {
              const auto i = static_cast<std::size_t>(r * m + j);
              gx[i] += g[i] - std::exp(y[i]) * total;
            }
          }
        });
      },
      "log_softmax");
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  if (x.ndim() < 1) throw ShapeError("layer_norm: scalar input");
  const i64 d = x.dim(-1);
  require_shape(gamma, {d}, "layer_norm gamma");
  require_shape(beta, {d}, "layer_norm beta");
  const i64 rows = x.numel() / d;
  auto xhat = std::make_shared<Values>(static_cast<std::size_t>(x.numel()));
  auto rstd = std::make_shared<Values>(static_cast<std::size_t>(rows));
  Values out(static_cast<std::size_t>(x.numel()));
  auto xd = x.data();
  auto gd = gamma.data();
  auto bd = beta.data();
  for (i64 r = 0; r < rows; ++r) {
    const double* row = xd.data() + r * d;
    double mu = 0.0;
    for (i64 j = 0; j < d; ++j) mu += row[j];
    mu /= static_cast<double>(d);
    double var = 0.0;
    for (i64 j = 0; j < d; ++j) var += (row[j] - mu) * (row[j] - mu);
    var /= static_cast<double>(d);
    const double rs = 1.0 / std::sqrt(var + eps);
    (*rstd)[static_cast<std::size_t>(r)] = rs;
    for (i64 j = 0; j < d; ++j) {
      const auto i = static_cast<std::size_t>(r * d + j);
      (*xhat)[i] = (row[j] - mu) * rs;
      out[i] = gd[static_cast<std::size_t>(j)] * (*xhat)[i] + bd[static_cast<std::size_t>(j)];
    }
  }
  return Tensor::make_result(
      x.shape(), std::move(out), {x, gamma, beta},
      [xhat, rstd, d, rows](std::span<const double> g, std::span<const double>,
                            std::vector<Tensor>& in) {
        auto gd = in[1].data();
        with_grad(in[0], [&](std::span<double> gx) {
          for (i64 r = 0; r < rows; ++r) {
            double mean_dxhat = 0.0, mean_dxhat_xhat = 0.0;
            for (i64 j = 0; j < d; ++j) {
              const auto i = static_cast<std::size_t>(r * d + j);
              const double dxh = g[i] * gd[static_cast<std::size_t>(j)];
              mean_dxhat += dxh;
              mean_dxhat_xhat += dxh * (*xhat)[i];
            }
            mean_dxhat /= static_cast<double>(d);
            mean_dxhat_xhat /= static_cast<double>(d);
            const double rs = (*rstd)[static_cast<std::size_t>(r)];
            for (i64 j = 0; j < d; ++j) {
              const auto i = static_cast<std::size_t>(r * d + j);
              const double dxh = g[i] * gd[static_cast<std::size_t>(j)];
              gx[i] += rs * (dxh - mean_dxhat - (*xhat)[i] * mean_dxhat_xhat);
            }
          }
        });
        with_grad(in[1], [&](std::span<double> gg) {
          for (std::size_t i = 0; i < g.size(); ++i) gg[i % static_cast<std::size_t>(d)] += g[i] * (*xhat)[i];
        });
        with_grad(in[2], [&](std::span<double> gb) {
          for (std::size_t i = 0; i < g.size(); ++i) gb[i % static_cast<std::size_t>(d)] += g[i];
        });
      },
      "layer_norm");
}

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& bias, int stride_h, int stride_w,
              int pad_h, int pad_w) {
  require_rank(x, 4, "conv2d input");
  require_rank(w, 4, "conv2d weight");
  kernels::ConvGeometry geom;
  geom.batch = x.dim(0);
  geom.in_channels = x.dim(1);
  geom.in_h = x.dim(2);
  geom.in_w = x.dim(3);
  geom.out_channels = w.dim(0);
  geom.kernel_h = w.dim(2);
  geom.kernel_w = w.dim(3);
  geom.stride_h = stride_h;
  geom.stride_w = stride_w;
  geom.pad_h = pad_h;
  geom.pad_w = pad_w;
  if (w.dim(1) != geom.in_channels) {
    throw ShapeError("conv2d: input " + shape_to_string(x.shape()) + " vs weight " +
                     shape_to_string(w.shape()));
  }
  if (geom.out_h() <= 0 || geom.out_w() <= 0) {
    throw ShapeError("conv2d: input " + shape_to_string(x.shape()) + " too small");
  }
  if (bias.defined()) require_shape(bias, {geom.out_channels}, "conv2d bias");
  Shape out_shape{geom.batch, geom.out_channels, geom.out_h(), geom.out_w()};
  Values out(static_cast<std::size_t>(shape_numel(out_shape)));
  kernels::conv2d_forward(geom, x.data().data(), w.data().data(),
                          bias.defined() ? bias.data().data() : nullptr, out.data());
  std::vector<Tensor> inputs{x, w};
  if (bias.defined()) inputs.push_back(bias);
  return Tensor::make_result(
      std::move(out_shape), std::move(out), std::move(inputs),
      [geom](std::span<const double> g, std::span<const double>, std::vector<Tensor>& in) {
        double* dx = in[0].requires_grad() ? in[0].grad_buffer().data() : nullptr;
        double* dw = in[1].requires_grad() ? in[1].grad_buffer().data() : nullptr;
        double* db = (in.size() > 2 && in[2].requires_grad()) ? in[2].grad_buffer().data() : nullptr;
        kernels::conv2d_backward(geom, in[0].data().data(), in[1].data().data(), g.data(), dx,
                                 dw, db);
      },
      "conv2d");
}

Tensor batch_norm2d(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                    Tensor& running_mean, Tensor& running_var, bool training,
                    double momentum, double eps) {
  require_rank(x, 4, "batch_norm2d");
  const i64 n = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
  require_shape(gamma, {c}, "batch_norm2d gamma");
  require_shape(beta, {c}, "batch_norm2d beta");
  require_shape(running_mean, {c}, "batch_norm2d running_mean");
  require_shape(running_var, {c}, "batch_norm2d running_var");
  const i64 count = n * hw;
  auto xhat = std::make_shared<Values>(static_cast<std::size_t>(x.numel()));
  auto rstd = std::make_shared<Values>(static_cast<std::size_t>(c));
  Values out(static_cast<std::size_t>(x.numel()));
  auto xd = x.data();
  auto gd = gamma.data();
  auto bd = beta.data();
  auto rm = running_mean.mutable_data();
  auto rv = running_var.mutable_data();
  for (i64 ch = 0; ch < c; ++ch) {
    double mu, var;
    if (training) {
      mu = 0.0;
      for (i64 b = 0; b < n; ++b)
        for (i64 p = 0; p < hw; ++p) mu += xd[static_cast<std::size_t>((b * c + ch) * hw + p)];
      mu /= static_cast<double>(count);
      var = 0.0;
      for (i64 b = 0; b < n; ++b)
        for (i64 p = 0; p < hw; ++p) {
          const double dv = xd[static_cast<std::size_t>((b * c + ch) * hw + p)] - mu;
          var += dv * dv;
        }
      var /= static_cast<double>(count);
      const double unbiased = count > 1 ? var * static_cast<double>(count) / static_cast<double>(count - 1) : var;
      rm[static_cast<std::size_t>(ch)] = (1.0 - momentum) * rm[static_cast<std::size_t>(ch)] + momentum * mu;
      rv[static_cast<std::size_t>(ch)] = (1.0 - momentum) * rv[static_cast<std::size_t>(ch)] + momentum * unbiased;
    } else {
      mu = rm[static_cast<std::size_t>(ch)];
      var = rv[static_cast<std::size_t>(ch)];
    }
    const double rs = 1.0 / std::sqrt(var + eps);
    (*rstd)[static_cast<std::size_t>(ch)] = rs;
    for (i64 b = 0; b < n; ++b)
      for (i64 p = 0; p < hw; ++p) {
        const auto i = static_cast<std::size_t>((b * c + ch) * hw + p);
        (*xhat)[i] = (xd[i] - mu) * rs;
        out[i] = gd[static_cast<std::size_t>(ch)] * (*xhat)[i] + bd[static_cast<std::size_t>(ch)];
      }
  }
  return Tensor::make_result(
      x.shape(), std::move(out), {x, gamma, beta},
      [xhat, rstd, n, c, hw, count, training](std::span<const double> g, std::span<const double>,
                                               std::vector<Tensor>& in) {
        auto gd = in[1].data();
        std::vector<double> sum_g(static_cast<std::size_t>(c), 0.0), sum_gx(static_cast<std::size_t>(c), 0.0);
        for (i64 b = 0; b < n; ++b)
          for (i64 ch = 0; ch < c; ++ch)
            for (i64 p = 0; p < hw; ++p) {
              const auto i = static_cast<std::size_t>((b * c + ch) * hw + p);
              sum_g[static_cast<std::size_t>(ch)] += g[i];
              sum_gx[static_cast<std::size_t>(ch)] += g[i] * (*xhat)[i];
            }
        with_grad(in[0], [&](std::span<double> gx) {
          for (i64 b = 0; b < n; ++b)
            for (i64 ch = 0; ch < c; ++ch) {
              const auto cs = static_cast<std::size_t>(ch);
              const double k = gd[cs] * (*rstd)[cs];
              const double mg = sum_g[cs] / static_cast<double>(count);
              const double mgx = sum_gx[cs] / static_cast<double>(count);
              for (i64 p = 0; p < hw; ++p) {
                const auto i = static_cast<std::size_t>((b * c + ch) * hw + p);
                gx[i] += training ? k * (g[i] - mg - (*xhat)[i] * mgx) : k * g[i];
              }
            }
        });
        with_grad(in[1], [&](std::span<double> gg) {
          for (i64 ch = 0; ch < c; ++ch) gg[static_cast<std::size_t>(ch)] += sum_gx[static_cast<std::size_t>(ch)];
        });
        with_grad(in[2], [&](std::span<double> gb) {
          for (i64 ch = 0; ch < c; ++ch) gb[static_cast<std::size_t>(ch)] += sum_g[static_cast<std::size_t>(ch)];
        });
      },
      "batch_norm2d");
}

Tensor max_pool2x2(const Tensor& x) {
  require_rank(x, 4, "max_pool2x2");
  const i64 planes = x.dim(0) * x.dim(1), h = x.dim(2), w = x.dim(3);
  if (h < 2 || w < 2) throw ShapeError("max_pool2x2: input " + shape_to_string(x.shape()) + " too small");
  Shape out_shape{x.dim(0), x.dim(1), h / 2, w / 2};
  Values out(static_cast<std::size_t>(shape_numel(out_shape)));
  auto argmax = std::make_shared<std::vector<i64>>(out.size());
  kernels::max_pool2x2_forward(planes, h, w, x.data().data(), out.data(), argmax->data());
  return Tensor::make_result(
      std::move(out_shape), std::move(out), {x},
      [argmax, planes, h, w](std::span<const double> g, std::span<const double>, std::vector<Tensor>& in) {
        with_grad(in[0], [&](std::span<double> gx) {
          kernels::max_pool2x2_backward(planes, h, w, g.data(), argmax->data(), gx.data());
        });
      },
      "max_pool2x2");
}

Tensor grid_sample(const Tensor& x, const Tensor& grid) {
  require_rank(x, 4, "grid_sample input");
  require_rank(grid, 4, "grid_sample grid");
  kernels::SampleGeometry geom;
  geom.batch = x.dim(0);
  geom.channels = x.dim(1);
  geom.in_h = x.dim(2);
  geom.in_w = x.dim(3);
  geom.out_h = grid.dim(1);
  geom.out_w = grid.dim(2);
  if (grid.dim(0) != geom.batch || grid.dim(3) != 2) {
    throw ShapeError("grid_sample: grid " + shape_to_string(grid.shape()) + " for input " +
                     shape_to_string(x.shape()));
  }
  Shape out_shape{geom.batch, geom.channels, geom.out_h, geom.out_w};
  Values out(static_cast<std::size_t>(shape_numel(out_shape)));
  kernels::grid_sample_forward(geom, x.data().data(), grid.data().data(), out.data());
  return Tensor::make_result(
      std::move(out_shape), std::move(out), {x, grid},
      [geom](std::span<const double> g, std::span<const double>, std::vector<Tensor>& in) {
        double* dx = in[0].requires_grad() ? in[0].grad_buffer().data() : nullptr;
        double* dgrid = in[1].requires_grad() ? in[1].grad_buffer().data() : nullptr;
        kernels::grid_sample_backward(geom, in[0].data().data(), in[1].data().data(), g.data(),
                                      dx, dgrid);
      },
      "grid_sample");
}

Tensor dropout(const Tensor& x, double p, bool training, Rng& rng) {
  if (!training || p <= 0.0) return x;
  if (p >= 1.0) throw ConfigError("dropout probability must be < 1");
  const double keep = 1.0 / (1.0 - p);
  auto mask = std::make_shared<Values>(static_cast<std::size_t>(x.numel()));
  Values out(x.data().begin(), x.data().end());
  for (std::size_t i = 0; i < out.size(); ++i) {
    (*mask)[i] = rng.uniform() < p ? 0.0 : keep;
    out[i] *= (*mask)[i];
  }
  return Tensor::make_result(
      x.shape(), std::move(out), {x},
      [mask](std::span<const double> g, std::span<const double>, std::vector<Tensor>& in) {
        with_grad(in[0], [&](std::span<double> gx) {
          for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * (*mask)[i];
        });
      },
      "dropout");
}

Tensor embedding(const Tensor& table, std::span<const int> indices) {
  require_rank(table, 2, "embedding");
  const i64 vocab = table.dim(0), d = table.dim(1);
  const i64 n = static_cast<i64>(indices.size());
  auto idx = std::make_shared<std::vector<int>>(indices.begin(), indices.end());
  Values out(static_cast<std::size_t>(n * d));
  auto td = table.data();
  for (i64 i = 0; i < n; ++i) {
    const int t = (*idx)[static_cast<std::size_t>(i)];
    if (t < 0 || t >= vocab) throw ShapeError("embedding: index " + std::to_string(t) + " out of range");
    std::copy(td.begin() + t * d, td.begin() + (t + 1) * d, out.begin() + i * d);
  }
  return Tensor::make_result(
      {n, d}, std::move(out), {table},
      [idx, d](std::span<const double> g, std::span<const double>, std::vector<Tensor>& in) {
        with_grad(in[0], [&](std::span<double> gt) {
          for (std::size_t i = 0; i < idx->size(); ++i) {
            const auto row = static_cast<std::size_t>((*idx)[i]) * static_cast<std::size_t>(d);
            for (i64 j = 0; j < d; ++j) gt[row + static_cast<std::size_t>(j)] += g[i * static_cast<std::size_t>(d) + static_cast<std::size_t>(j)];
          }
        });
      },
      "embedding");
}

Tensor sum(const Tensor& x) {
  double s = 0.0;
  for (double v : x.data()) s += v;
  return Tensor::make_result(
      {}, {s}, {x},
      [](std::span<const double> g, std::span<const double>, std::vector<Tensor>& in) {
        with_grad(in[0], [&](std::span<double> gx) {
          for (auto& v : gx) v += g[0];
        });
      },
      "sum");
}

Tensor mean(const Tensor& x) {
  if (x.numel() == 0) throw ShapeError("mean of empty tensor");
  return scale(sum(x), 1.0 / static_cast<double>(x.numel()));
}

}  // namespace strec::ops
