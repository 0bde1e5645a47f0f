// Copyright 2026 The amsinc Authors
//
// Licensed under the Apache License, Version 2.0

#pragma once

#include <cstddef>
#include <vector>

#include "amsinc/tensor.hpp"

/// Dense kernels with explicit backward counterparts.
///
/// Every kernel is a pure function of its arguments. Kernels that reduce over
/// the batch dimension accumulate per-sample partials and sum them in sample
/// order, so results do not depend on the worker count.
namespace amsinc::ndarr {

/// C = A·B for A[M,K], B[K,N].
Tensor matmul(const Tensor& a, const Tensor& b);
/// C = A·Bᵀ for A[M,K], B[N,K].
Tensor matmul_a_bt(const Tensor& a, const Tensor& b);
/// C = Aᵀ·B for A[K,M], B[K,N].
Tensor matmul_at_b(const Tensor& a, const Tensor& b);

/// Output length of a valid (unpadded) 1-D convolution.
std::size_t conv1d_out_len(std::size_t in_len, std::size_t kernel_len, std::size_t stride);

/// y[b,o,t] = Σ_{c,l} x[b,c,t·stride+l]·k[o,c,l] with valid padding.
Tensor conv1d_forward(const Tensor& x, const Tensor& k, std::size_t stride = 1);

struct Conv1dGrads {
  Tensor grad_x;
  Tensor grad_k;
};

/// Exact gradients of conv1d_forward. Zero entries of grad_y are skipped,
/// which makes the pooled-sparse gradients of the network cheap.
Conv1dGrads conv1d_backward(const Tensor& grad_y, const Tensor& x, const Tensor& k,
                            std::size_t stride = 1);

struct MaxPoolResult {
  Tensor y;
  /// Flat input index of each output's maximum (first index on ties).
  std::vector<std::size_t> argmax;
};

/// Non-overlapping max pooling over the last axis of x[B,C,T]; the trailing
/// remainder T mod width is dropped.
MaxPoolResult maxpool1d(const Tensor& x, std::size_t width);
Tensor maxpool1d_backward(const Tensor& grad_y, const std::vector<std::size_t>& argmax,
                          const Shape& input_shape);

/// out[i] = log Σ_j exp(x[i,j]), evaluated with the max shift.
Tensor logsumexp_rows(const Tensor& x);
/// Row-wise softmax of x[N,C].
Tensor softmax_rows(const Tensor& x);

}  // namespace amsinc::ndarr
