// Copyright 2026 The amsinc Authors
//
// Licensed under the Apache License, Version 2.0

#pragma once

#include <cstddef>
#include <random>
#include <string>
#include <vector>

#include "amsinc/params.hpp"
#include "amsinc/sincbank.hpp"
#include "amsinc/tensor.hpp"

namespace amsinc::net {

// ---- layers ---------------------------------------------------------------

inline constexpr double kLayerNormEps = 1e-5;

struct LayerNormCache {
  Tensor xhat;                  // normalized input, same shape as x
  std::vector<double> inv_std;  // per batch element
};

struct LayerNormForward {
  Tensor y;
  LayerNormCache cache;
};

/// Normalizes every batch element over all of its non-batch values, then
/// applies gain and bias of shape x.shape()[1:].
LayerNormForward layernorm_forward(const Tensor& x, const Tensor& gain, const Tensor& bias);

struct LayerNormGrads {
  Tensor grad_x;
  Tensor grad_gain;
  Tensor grad_bias;
};

LayerNormGrads layernorm_backward(const Tensor& grad_y, const LayerNormCache& cache,
                                  const Tensor& gain);

Tensor leaky_relu(const Tensor& x, double slope = 0.2);
Tensor leaky_relu_backward(const Tensor& grad_y, const Tensor& x, double slope = 0.2);

/// Uniform in ±sqrt(6 / (fan_in + fan_out)). Rank 2 is [out, in]; rank 3 is
/// a conv kernel [out, in, L] with fans scaled by L.
Tensor glorot_init(const Shape& shape, std::mt19937_64& rng);
double glorot_bound(const Shape& shape);

// ---- model ----------------------------------------------------------------

struct ModelConfig {
  int sample_rate_hz = 16000;
  std::size_t frame_len = 3200;
  std::size_t sinc_filters = 80;
  std::size_t sinc_len = 251;
  double sinc_min_low_hz = 50.0;
  double sinc_min_band_hz = 50.0;
  std::vector<std::size_t> conv_filters{60, 60};
  std::vector<std::size_t> conv_kernels{5, 5};
  /// One width per convolutional block, the sinc block first. 1 disables.
  std::vector<std::size_t> pool_widths{3, 3, 3};
  std::vector<std::size_t> dense_widths{2048, 2048, 2048};
  double leaky_slope = 0.2;
  /// |·| after the sinc layer.
  bool rectify = true;
  /// Inverted dropout after each dense activation, training only.
  double dropout = 0.0;
  std::size_t num_speakers = 0;

  void validate() const;
  sinc::SincConstants sinc_constants() const;
  /// (channels, length) leaving each convolutional block, sinc block first.
  std::vector<std::pair<std::size_t, std::size_t>> block_extents() const;
  std::size_t flatten_size() const;
  std::size_t embedding_dim() const;
};

/// Desk-scale architecture: F=16, L=101, two conv layers of 8 filters with
/// kernel 5, three dense layers of width 64.
ModelConfig desk_model_config(std::size_t num_speakers, std::size_t frame_len = 3200);

struct Model {
  ModelConfig config;
  ParamSet params;
};

/// Mel-initialized sinc layer, Glorot conv/dense/classifier weights, zero
/// biases, unit layer-norm gains.
Model init_model(const ModelConfig& config, std::mt19937_64& rng);

/// View of the registry's sinc parameters with the config's constants.
sinc::SincParams sinc_params(const Model& model);

struct ForwardOptions {
  bool training = false;
  std::mt19937_64* dropout_rng = nullptr;
};

struct ConvBlockCache {
  Tensor conv_out;  // sinc: pre-rectification output
  Shape pool_in_shape;
  std::vector<std::size_t> argmax;
  LayerNormCache norm;
  Tensor norm_out;  // leaky input
};

struct DenseCache {
  Tensor input;
  LayerNormCache norm;
  Tensor norm_out;
  std::vector<double> dropout_mask;  // empty when dropout is inactive
};

struct ForwardCache {
  Shape params_signature;  // sizes of every registered tensor, for mismatch checks
  std::size_t batch = 0;
  LayerNormCache input_norm;
  sinc::SincCache sinc;
  std::vector<Tensor> conv_inputs;  // input of conv layer i
  std::vector<ConvBlockCache> blocks;
  Shape flatten_from;
  std::vector<DenseCache> dense;
};

struct ModelForward {
  Tensor embeddings;  // [B, D_embed]
  ForwardCache cache;
};

/// input norm → sinc → |·| → pool → norm → leaky → [conv → pool → norm →
/// leaky]×N → flatten → [dense → norm → leaky]×M.
ModelForward model_forward(const Model& model, const Tensor& frames, const ForwardOptions& opts = {});

/// Gradients for every registered parameter except the classifier weight,
/// which belongs to the loss head and is returned as zeros.
ParamSet model_backward(const Tensor& grad_embeddings, const ForwardCache& cache, const Model& model);

inline constexpr const char* kClassifierName = "classifier.weight";

}  // namespace amsinc::net
