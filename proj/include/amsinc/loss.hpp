// Copyright 2026 The amsinc Authors
//
// Licensed under the Apache License, Version 2.0

#pragma once

#include <span>
#include <string>
#include <vector>

#include "amsinc/tensor.hpp"

namespace amsinc::loss {

enum class LossKind { kSoftmax, kAmSoftmax };

std::string to_string(LossKind kind);
LossKind parse_loss_kind(const std::string& s);

struct LossConfig {
  LossKind kind = LossKind::kAmSoftmax;
  double scale = 30.0;   // s
  double margin = 0.5;   // m
  double eps_div = 1e-11;
  double eps_norm = 1e-12;
  /// Baseline head only: use s·cos logits instead of raw f·Wᵀ.
  bool normalize_baseline = false;

  void validate() const;
};

struct LossOutput {
  double loss = 0.0;         // batch mean
  Tensor grad_embeddings;    // [n, D]
  Tensor grad_W;             // [C, D]
  Tensor posteriors;         // [n, C], margin-free
};

/// Each row divided by max(‖row‖₂, eps_norm).
Tensor l2_normalize_rows(const Tensor& x, double eps_norm = 1e-12);
/// Vector-Jacobian product of l2_normalize_rows.
Tensor l2_normalize_rows_backward(const Tensor& grad_out, const Tensor& x, double eps_norm = 1e-12);

/// Cosine similarity of every embedding with every classifier row, [n, C].
Tensor cosine_matrix(const Tensor& embeddings, const Tensor& W, double eps_norm = 1e-12);

/// Additive-margin softmax on normalized embeddings and classifier rows:
/// z = s·cos − s·m·[j == y], loss = mean(logsumexp(z) − z_y).
LossOutput am_softmax(const Tensor& embeddings, const Tensor& W, std::span<const int> labels,
                      const LossConfig& cfg);

/// Literal exp-ratio evaluation with the eps_div guard in the denominator.
/// Loss value only; kept as a cross-check for the log-space path.
double am_softmax_direct(const Tensor& embeddings, const Tensor& W, std::span<const int> labels,
                         const LossConfig& cfg);

/// Plain cross-entropy on f·Wᵀ (or on s·cos with normalize_baseline).
LossOutput softmax_ce(const Tensor& embeddings, const Tensor& W, std::span<const int> labels,
                      const LossConfig& cfg = {LossKind::kSoftmax});

/// Dispatches on cfg.kind.
LossOutput compute_loss(const Tensor& embeddings, const Tensor& W, std::span<const int> labels,
                        const LossConfig& cfg);

/// Margin-free posteriors of the configured head, without gradients.
Tensor posteriors(const Tensor& embeddings, const Tensor& W, const LossConfig& cfg);

/// Per-sample cos(f, W_y) − max_{j≠y} cos(f, W_j); needs C ≥ 2.
std::vector<double> decision_margins(const Tensor& embeddings, const Tensor& W, std::span<const int> labels,
                                     double eps_norm = 1e-12);

/// Mean over samples of cos(f, W_y) − max_{j≠y} cos(f, W_j). Needs at least
/// two distinct labels in the batch.
double decision_margin_stat(const Tensor& embeddings, const Tensor& W, std::span<const int> labels,
                            double eps_norm = 1e-12);

}  // namespace amsinc::loss
