// Copyright 2026 The amsinc Authors
//
// Licensed under the Apache License, Version 2.0

#include "amsinc/loss.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include <fmt/format.h>

#include "amsinc/error.hpp"
#include "amsinc/ndarr.hpp"

namespace amsinc::loss {

std::string to_string(LossKind kind) {
  return kind == LossKind::kSoftmax ? "softmax" : "am_softmax";
}

LossKind parse_loss_kind(const std::string& s) {
  if (s == "softmax") return LossKind::kSoftmax;
  if (s == "am_softmax" || s == "am") return LossKind::kAmSoftmax;
  throw ConfigError("unknown loss kind '" + s + "' (expected softmax or am_softmax)");
}

void LossConfig::validate() const {
  if (!(scale > 0.0)) throw ConfigError(fmt::format("loss: scale must be > 0, got {}", scale));
  if (!(margin >= 0.0 && margin < 1.0)) {
    throw ConfigError(fmt::format("loss: margin must lie in [0,1), got {}", margin));
  }
  if (!(eps_div > 0.0) || !(eps_norm > 0.0)) throw ConfigError("loss: eps values must be positive");
}

Tensor l2_normalize_rows(const Tensor& x, double eps_norm) {
  if (x.rank() != 2) throw DimensionError("l2_normalize_rows: expected a matrix, got " + shape_str(x.shape()));
  const std::size_t n = x.dim(0), d = x.dim(1);
  Tensor out(x.shape());
  for (std::size_t i = 0; i < n; ++i) {
    const double* r = x.data() + i * d;
    double ss = 0.0;
    for (std::size_t k = 0; k < d; ++k) ss += r[k] * r[k];
    const double denom = std::max(std::sqrt(ss), eps_norm);
    for (std::size_t k = 0; k < d; ++k) out[i * d + k] = r[k] / denom;
  }
  return out;
}

Tensor l2_normalize_rows_backward(const Tensor& grad_out, const Tensor& x, double eps_norm) {
  if (grad_out.shape() != x.shape() || x.rank() != 2) {
    throw DimensionError("l2_normalize_rows_backward: shape mismatch");
  }
  const std::size_t n = x.dim(0), d = x.dim(1);
  Tensor gx(x.shape());
  for (std::size_t i = 0; i < n; ++i) {
    const double* r = x.data() + i * d;
    const double* g = grad_out.data() + i * d;
    double* o = gx.data() + i * d;
    double ss = 0.0;
    for (std::size_t k = 0; k < d; ++k) ss += r[k] * r[k];
    const double norm = std::sqrt(ss);
    if (norm == 0.0) continue;  // subgradient 0 at the origin
    if (norm <= eps_norm) {
      for (std::size_t k = 0; k < d; ++k) o[k] = g[k] / eps_norm;
      continue;
    }
    double dot = 0.0;
    for (std::size_t k = 0; k < d; ++k) dot += r[k] * g[k];
    dot /= norm;
    for (std::size_t k = 0; k < d; ++k) o[k] = (g[k] - (r[k] / norm) * dot) / norm;
  }
  return gx;
}

Tensor cosine_matrix(const Tensor& embeddings, const Tensor& W, double eps_norm) {
  return ndarr::matmul_a_bt(l2_normalize_rows(embeddings, eps_norm), l2_normalize_rows(W, eps_norm));
}

namespace {

void check_inputs(const Tensor& f, const Tensor& W, std::span<const int> labels, const char* op) {
  if (f.rank() != 2 || W.rank() != 2 || f.dim(1) != W.dim(1)) {
    throw DimensionError(fmt::format("{}: embeddings {} and W {} disagree", op, shape_str(f.shape()),
                                     shape_str(W.shape())));
  }
  if (labels.size() != f.dim(0)) {
    throw DimensionError(fmt::format("{}: {} labels for {} embeddings", op, labels.size(), f.dim(0)));
  }
  const auto classes = static_cast<int>(W.dim(0));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= classes) {
      throw DataError(fmt::format("{}: label {} of sample {} outside [0,{})", op, labels[i], i, classes));
    }
  }
  ensure_finite(f, std::string(op) + " embeddings");
  ensure_finite(W, std::string(op) + " W");
}

// log(1 + Σ_{j≠y} exp(z_j - z_y)), accurate even when the sum is far below
// machine epsilon.
double row_loss(const double* z, std::size_t classes, int y) {
  const double zy = z[y];
  double top = 0.0;
  for (std::size_t j = 0; j < classes; ++j)
    if (static_cast<int>(j) != y) top = std::max(top, z[j] - zy);
  if (top <= 0.0) {
    double s = 0.0;
    for (std::size_t j = 0; j < classes; ++j)
      if (static_cast<int>(j) != y) s += std::exp(z[j] - zy);
    return std::log1p(s);
  }
  double s = std::exp(-top);
  for (std::size_t j = 0; j < classes; ++j)
    if (static_cast<int>(j) != y) s += std::exp(z[j] - zy - top);
  return top + std::log(s);
}

// Shared head: logits = s·cos − s·m·onehot when normalized, else f·Wᵀ.
LossOutput margin_head(const Tensor& f, const Tensor& W, std::span<const int> labels, double scale,
                       double margin, bool normalized, double eps_norm) {
  const std::size_t n = f.dim(0), classes = W.dim(0);
  Tensor fh, wh, z;
  if (normalized) {
    fh = l2_normalize_rows(f, eps_norm);
    wh = l2_normalize_rows(W, eps_norm);
    z = ndarr::matmul_a_bt(fh, wh);
    for (double& v : z.values()) v *= scale;
  } else {
    z = ndarr::matmul_a_bt(f, W);
  }
  LossOutput out;
  out.posteriors = ndarr::softmax_rows(z);  // margin-free
  Tensor zm = z;
  if (margin != 0.0) {
    for (std::size_t i = 0; i < n; ++i) zm[i * classes + static_cast<std::size_t>(labels[i])] -= scale * margin;
  }
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) total += row_loss(zm.data() + i * classes, classes, labels[i]);
  out.loss = total / static_cast<double>(n);
  if (!std::isfinite(out.loss)) throw NumericError("loss: non-finite loss value");

  Tensor gz = margin != 0.0 ? ndarr::softmax_rows(zm) : out.posteriors;
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    gz[i * classes + static_cast<std::size_t>(labels[i])] -= 1.0;
    for (std::size_t j = 0; j < classes; ++j) gz[i * classes + j] *= inv_n;
  }
  if (normalized) {
    for (double& v : gz.values()) v *= scale;
    out.grad_embeddings = l2_normalize_rows_backward(ndarr::matmul(gz, wh), f, eps_norm);
    out.grad_W = l2_normalize_rows_backward(ndarr::matmul_at_b(gz, fh), W, eps_norm);
  } else {
    out.grad_embeddings = ndarr::matmul(gz, W);
    out.grad_W = ndarr::matmul_at_b(gz, f);
  }
  return out;
}

}  // namespace

LossOutput am_softmax(const Tensor& embeddings, const Tensor& W, std::span<const int> labels,
                      const LossConfig& cfg) {
  cfg.validate();
  if (cfg.kind != LossKind::kAmSoftmax) throw ConfigError("am_softmax: config kind is not am_softmax");
  check_inputs(embeddings, W, labels, "am_softmax");
  return margin_head(embeddings, W, labels, cfg.scale, cfg.margin, true, cfg.eps_norm);
}

double am_softmax_direct(const Tensor& embeddings, const Tensor& W, std::span<const int> labels,
                         const LossConfig& cfg) {
  cfg.validate();
  check_inputs(embeddings, W, labels, "am_softmax_direct");
  const Tensor cos = cosine_matrix(embeddings, W, cfg.eps_norm);
  const std::size_t n = cos.dim(0), classes = cos.dim(1);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto y = static_cast<std::size_t>(labels[i]);
    const double phi = std::exp(cfg.scale * (cos[i * classes + y] - cfg.margin));
    double others = 0.0;
    for (std::size_t j = 0; j < classes; ++j)
      if (j != y) others += std::exp(cfg.scale * cos[i * classes + j]);
    total += std::log(phi / (phi + others + cfg.eps_div));
  }
  return -total / static_cast<double>(n);
}

LossOutput softmax_ce(const Tensor& embeddings, const Tensor& W, std::span<const int> labels,
                      const LossConfig& cfg) {
  cfg.validate();
  if (cfg.kind != LossKind::kSoftmax) throw ConfigError("softmax_ce: config kind is not softmax");
  check_inputs(embeddings, W, labels, "softmax_ce");
  return margin_head(embeddings, W, labels, cfg.scale, 0.0, cfg.normalize_baseline, cfg.eps_norm);
}

LossOutput compute_loss(const Tensor& embeddings, const Tensor& W, std::span<const int> labels,
                        const LossConfig& cfg) {
  return cfg.kind == LossKind::kAmSoftmax ? am_softmax(embeddings, W, labels, cfg)
                                          : softmax_ce(embeddings, W, labels, cfg);
}

Tensor posteriors(const Tensor& embeddings, const Tensor& W, const LossConfig& cfg) {
  if (cfg.kind == LossKind::kAmSoftmax || cfg.normalize_baseline) {
    Tensor z = cosine_matrix(embeddings, W, cfg.eps_norm);
    for (double& v : z.values()) v *= cfg.scale;
    return ndarr::softmax_rows(z);
  }
  return ndarr::softmax_rows(ndarr::matmul_a_bt(embeddings, W));
}

std::vector<double> decision_margins(const Tensor& embeddings, const Tensor& W, std::span<const int> labels,
                                     double eps_norm) {
  check_inputs(embeddings, W, labels, "decision_margins");
  if (W.dim(0) < 2) throw DataError("decision_margins: needs at least two classes");
  const Tensor cos = cosine_matrix(embeddings, W, eps_norm);
  const std::size_t n = cos.dim(0), classes = cos.dim(1);
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto y = static_cast<std::size_t>(labels[i]);
    double best_other = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < classes; ++j)
      if (j != y) best_other = std::max(best_other, cos[i * classes + j]);
    out[i] = cos[i * classes + y] - best_other;
  }
  return out;
}

double decision_margin_stat(const Tensor& embeddings, const Tensor& W, std::span<const int> labels,
                            double eps_norm) {
  const std::set<int> distinct(labels.begin(), labels.end());
  if (distinct.size() < 2) throw DataError("decision_margin_stat: needs at least two classes in the batch");
  const auto margins = decision_margins(embeddings, W, labels, eps_norm);
  double total = 0.0;
  for (const double m : margins) total += m;
  return total / static_cast<double>(margins.size());
}

}  // namespace amsinc::loss
