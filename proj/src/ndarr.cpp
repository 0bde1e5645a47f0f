// Copyright 2026 The amsinc Authors
//
// Licensed under the Apache License, Version 2.0

#include "amsinc/ndarr.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "amsinc/error.hpp"
#include "amsinc/parallel.hpp"

namespace amsinc::ndarr {

namespace {

constexpr std::size_t kSparseKernelLen = 16;

void require_rank(const Tensor& t, std::size_t rank, const char* op, const char* name) {
  if (t.rank() != rank) {
    throw DimensionError(fmt::format("{}: {} must have rank {}, got shape {}", op, name, rank,
                                     shape_str(t.shape())));
  }
}

// y[t] += Σ_l k[l]·x[t+l] for t < tout. Blocked so the accumulators stay in
// registers; per-output summation order is ascending l, same as the naive loop.
void correlate_row(const double* x, const double* k, std::size_t klen, double* y,
                   std::size_t tout) {
  constexpr std::size_t kBlock = 96;
  std::size_t t0 = 0;
  for (; t0 + kBlock <= tout; t0 += kBlock) {
    double acc[kBlock];
    for (std::size_t j = 0; j < kBlock; ++j) acc[j] = y[t0 + j];
    for (std::size_t l = 0; l < klen; ++l) {
      const double kv = k[l];
      const double* xp = x + t0 + l;
      for (std::size_t j = 0; j < kBlock; ++j) acc[j] += kv * xp[j];
    }
    for (std::size_t j = 0; j < kBlock; ++j) y[t0 + j] = acc[j];
  }
  for (; t0 < tout; ++t0) {
    double s = y[t0];
    for (std::size_t l = 0; l < klen; ++l) s += k[l] * x[t0 + l];
    y[t0] = s;
  }
}

// Σ a[i]·b[i] over kLanes interleaved partial sums, combined in lane order.
double dot_lanes(const double* a, const double* b, std::size_t n) {
  constexpr std::size_t kLanes = 8;
  double acc[kLanes] = {};
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes)
    for (std::size_t j = 0; j < kLanes; ++j) acc[j] += a[i + j] * b[i + j];
  double s = 0.0;
  for (std::size_t j = 0; j < kLanes; ++j) s += acc[j];
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank(a, 2, "matmul", "A");
  require_rank(b, 2, "matmul", "B");
  if (a.dim(1) != b.dim(0)) {
    throw DimensionError(fmt::format("matmul: inner dimensions disagree, A {} vs B {}",
                                     shape_str(a.shape()), shape_str(b.shape())));
  }
  const std::size_t m = a.dim(0), kk = a.dim(1), n = b.dim(1);
  Tensor c({m, n});
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = c.data() + i * n;
    for (std::size_t p = 0; p < kk; ++p) {
      const double av = a[i * kk + p];
      const double* brow = b.data() + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
  ensure_finite(c, "matmul");
  return c;
}

Tensor matmul_a_bt(const Tensor& a, const Tensor& b) {
  require_rank(a, 2, "matmul_a_bt", "A");
  require_rank(b, 2, "matmul_a_bt", "B");
  if (a.dim(1) != b.dim(1)) {
    throw DimensionError(fmt::format("matmul_a_bt: inner dimensions disagree, A {} vs B {}",
                                     shape_str(a.shape()), shape_str(b.shape())));
  }
  const std::size_t m = a.dim(0), kk = a.dim(1), n = b.dim(0);
  Tensor c({m, n});
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = a.data() + i * kk;
    for (std::size_t j = 0; j < n; ++j) {
      const double* brow = b.data() + j * kk;
      double s = 0.0;
      for (std::size_t p = 0; p < kk; ++p) s += arow[p] * brow[p];
      c[i * n + j] = s;
    }
  }
  ensure_finite(c, "matmul_a_bt");
  return c;
}

Tensor matmul_at_b(const Tensor& a, const Tensor& b) {
  require_rank(a, 2, "matmul_at_b", "A");
  require_rank(b, 2, "matmul_at_b", "B");
  if (a.dim(0) != b.dim(0)) {
    throw DimensionError(fmt::format("matmul_at_b: inner dimensions disagree, A {} vs B {}",
                                     shape_str(a.shape()), shape_str(b.shape())));
  }
  const std::size_t kk = a.dim(0), m = a.dim(1), n = b.dim(1);
  Tensor c({m, n});
  for (std::size_t p = 0; p < kk; ++p) {
    const double* brow = b.data() + p * n;
    for (std::size_t i = 0; i < m; ++i) {
      const double av = a[p * m + i];
      double* crow = c.data() + i * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
  ensure_finite(c, "matmul_at_b");
  return c;
}

std::size_t conv1d_out_len(std::size_t in_len, std::size_t kernel_len, std::size_t stride) {
  if (stride == 0) throw ConfigError("conv1d: stride must be positive");
  if (kernel_len == 0 || kernel_len > in_len) {
    throw DimensionError(
        fmt::format("conv1d: kernel length {} exceeds input length {}", kernel_len, in_len));
  }
  return (in_len - kernel_len) / stride + 1;
}

Tensor conv1d_forward(const Tensor& x, const Tensor& k, std::size_t stride) {
  require_rank(x, 3, "conv1d_forward", "x");
  require_rank(k, 3, "conv1d_forward", "k");
  const std::size_t batch = x.dim(0), cin = x.dim(1), tin = x.dim(2);
  const std::size_t cout = k.dim(0), klen = k.dim(2);
  if (k.dim(1) != cin) {
    throw DimensionError(fmt::format("conv1d_forward: kernel {} expects {} input channels, x is {}",
                                     shape_str(k.shape()), k.dim(1), shape_str(x.shape())));
  }
  const std::size_t tout = conv1d_out_len(tin, klen, stride);
  Tensor y({batch, cout, tout});
  parallel_for(batch, [&](std::size_t b) {
    for (std::size_t o = 0; o < cout; ++o) {
      double* yrow = y.data() + (b * cout + o) * tout;
      for (std::size_t c = 0; c < cin; ++c) {
        const double* xrow = x.data() + (b * cin + c) * tin;
        const double* krow = k.data() + (o * cin + c) * klen;
        if (stride == 1) {
          correlate_row(xrow, krow, klen, yrow, tout);
        } else {
          for (std::size_t t = 0; t < tout; ++t) {
            double s = yrow[t];
            const double* xp = xrow + t * stride;
            for (std::size_t l = 0; l < klen; ++l) s += krow[l] * xp[l];
            yrow[t] = s;
          }
        }
      }
    }
  });
  ensure_finite(y, "conv1d_forward");
  return y;
}

Conv1dGrads conv1d_backward(const Tensor& grad_y, const Tensor& x, const Tensor& k,
                            std::size_t stride) {
  require_rank(grad_y, 3, "conv1d_backward", "grad_y");
  require_rank(x, 3, "conv1d_backward", "x");
  require_rank(k, 3, "conv1d_backward", "k");
  const std::size_t batch = x.dim(0), cin = x.dim(1), tin = x.dim(2);
  const std::size_t cout = k.dim(0), klen = k.dim(2);
  if (k.dim(1) != cin) {
    throw DimensionError(fmt::format("conv1d_backward: kernel {} does not match x {}",
                                     shape_str(k.shape()), shape_str(x.shape())));
  }
  const std::size_t tout = conv1d_out_len(tin, klen, stride);
  const Shape expected{batch, cout, tout};
  if (grad_y.shape() != expected) {
    throw DimensionError(fmt::format("conv1d_backward: grad_y is {}, forward output is {}",
                                     shape_str(grad_y.shape()), shape_str(expected)));
  }

  Conv1dGrads g{Tensor(x.shape()), Tensor(k.shape())};
  const std::size_t ksize = k.size();
  std::vector<double> partial(batch * ksize, 0.0);
  // Long kernels follow the sparse grad_y left by max pooling; short ones use
  // dense row operations that vectorize along t.
  const bool sparse = klen >= kSparseKernelLen || stride != 1;
  parallel_for(batch, [&](std::size_t b) {
    double* gk_b = partial.data() + b * ksize;
    const double* gy_b = grad_y.data() + b * cout * tout;
    const double* x_b = x.data() + b * cin * tin;
    double* gx_b = g.grad_x.data() + b * cin * tin;
    for (std::size_t o = 0; o < cout; ++o) {
      const double* gyrow = gy_b + o * tout;
      for (std::size_t c = 0; c < cin; ++c) {
        const double* xrow = x_b + c * tin;
        const double* krow = k.data() + (o * cin + c) * klen;
        double* gxrow = gx_b + c * tin;
        double* gkrow = gk_b + (o * cin + c) * klen;
        if (sparse) {
          for (std::size_t t = 0; t < tout; ++t) {
            const double gv = gyrow[t];
            if (gv == 0.0) continue;
            const double* xp = xrow + t * stride;
            double* gxp = gxrow + t * stride;
            for (std::size_t l = 0; l < klen; ++l) gkrow[l] += gv * xp[l];
            for (std::size_t l = 0; l < klen; ++l) gxp[l] += gv * krow[l];
          }
          continue;
        }
        for (std::size_t l = 0; l < klen; ++l) {
          gkrow[l] += dot_lanes(gyrow, xrow + l, tout);
          const double kv = krow[l];
          double* gxp = gxrow + l;
          for (std::size_t t = 0; t < tout; ++t) gxp[t] += kv * gyrow[t];
        }
      }
    }
  });
  double* gk = g.grad_k.data();
  for (std::size_t b = 0; b < batch; ++b) {
    const double* src = partial.data() + b * ksize;
    for (std::size_t i = 0; i < ksize; ++i) gk[i] += src[i];
  }
  ensure_finite(g.grad_x, "conv1d_backward grad_x");
  ensure_finite(g.grad_k, "conv1d_backward grad_k");
  return g;
}

MaxPoolResult maxpool1d(const Tensor& x, std::size_t width) {
  if (width == 0) throw ConfigError("maxpool1d: width must be at least 1");
  require_rank(x, 3, "maxpool1d", "x");
  const std::size_t rows = x.dim(0) * x.dim(1), tin = x.dim(2);
  const std::size_t tout = tin / width;
  if (tout == 0) {
    throw DimensionError(fmt::format("maxpool1d: width {} exceeds input length {}", width, tin));
  }
  MaxPoolResult r{Tensor({x.dim(0), x.dim(1), tout}), std::vector<std::size_t>(rows * tout)};
  for (std::size_t row = 0; row < rows; ++row) {
    for (std::size_t t = 0; t < tout; ++t) {
      std::size_t best = row * tin + t * width;
      for (std::size_t j = 1; j < width; ++j) {
        const std::size_t idx = row * tin + t * width + j;
        if (x[idx] > x[best]) best = idx;
      }
      r.y[row * tout + t] = x[best];
      r.argmax[row * tout + t] = best;
    }
  }
  ensure_finite(r.y, "maxpool1d");
  return r;
}

Tensor maxpool1d_backward(const Tensor& grad_y, const std::vector<std::size_t>& argmax,
                          const Shape& input_shape) {
  if (grad_y.size() != argmax.size()) {
    throw DimensionError(fmt::format("maxpool1d_backward: grad_y {} does not match cache of {}",
                                     shape_str(grad_y.shape()), argmax.size()));
  }
  Tensor gx(input_shape);
  for (std::size_t i = 0; i < argmax.size(); ++i) {
    if (argmax[i] >= gx.size()) throw DimensionError("maxpool1d_backward: stale argmax cache");
    gx[argmax[i]] += grad_y[i];
  }
  return gx;
}

Tensor logsumexp_rows(const Tensor& x) {
  require_rank(x, 2, "logsumexp_rows", "x");
  ensure_finite(x, "logsumexp_rows input");
  const std::size_t n = x.dim(0), c = x.dim(1);
  Tensor out({n});
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = x.data() + i * c;
    const double mx = *std::max_element(row, row + c);
    double s = 0.0;
    for (std::size_t j = 0; j < c; ++j) s += std::exp(row[j] - mx);
    out[i] = mx + std::log(s);
  }
  return out;
}

Tensor softmax_rows(const Tensor& x) {
  require_rank(x, 2, "softmax_rows", "x");
  ensure_finite(x, "softmax_rows input");
  const std::size_t n = x.dim(0), c = x.dim(1);
  Tensor out(x.shape());
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = x.data() + i * c;
    double* orow = out.data() + i * c;
    const double mx = *std::max_element(row, row + c);
    double s = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      orow[j] = std::exp(row[j] - mx);
      s += orow[j];
    }
    for (std::size_t j = 0; j < c; ++j) orow[j] /= s;
  }
  return out;
}

}  // namespace amsinc::ndarr
