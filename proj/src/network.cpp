// Copyright 2026 The amsinc Authors
//
// Licensed under the Apache License, Version 2.0

#include "amsinc/network.hpp"

#include <cmath>

#include <fmt/format.h>

#include "amsinc/error.hpp"
#include "amsinc/ndarr.hpp"

namespace amsinc::net {

// ---- layers ---------------------------------------------------------------

LayerNormForward layernorm_forward(const Tensor& x, const Tensor& gain, const Tensor& bias) {
  if (x.rank() < 2) throw DimensionError("layernorm: input needs a batch axis, got " + shape_str(x.shape()));
  const std::size_t batch = x.dim(0);
  const std::size_t m = x.size() / batch;
  const Shape sample(x.shape().begin() + 1, x.shape().end());
  if (gain.shape() != sample || bias.shape() != sample) {
    throw DimensionError(fmt::format("layernorm: gain {} / bias {} do not match sample shape {}",
                                     shape_str(gain.shape()), shape_str(bias.shape()),
                                     shape_str(sample)));
  }
  LayerNormForward out{Tensor(x.shape()), {Tensor(x.shape()), std::vector<double>(batch)}};
  for (std::size_t b = 0; b < batch; ++b) {
    const double* xr = x.data() + b * m;
    double mean = 0.0;
    for (std::size_t i = 0; i < m; ++i) mean += xr[i];
    mean /= static_cast<double>(m);
    double var = 0.0;
    for (std::size_t i = 0; i < m; ++i) var += (xr[i] - mean) * (xr[i] - mean);
    var /= static_cast<double>(m);
    const double inv = 1.0 / std::sqrt(var + kLayerNormEps);
    out.cache.inv_std[b] = inv;
    double* xh = out.cache.xhat.data() + b * m;
    double* yr = out.y.data() + b * m;
    for (std::size_t i = 0; i < m; ++i) {
      xh[i] = (xr[i] - mean) * inv;
      yr[i] = gain[i] * xh[i] + bias[i];
    }
  }
  ensure_finite(out.y, "layernorm_forward");
  return out;
}

LayerNormGrads layernorm_backward(const Tensor& grad_y, const LayerNormCache& cache,
                                  const Tensor& gain) {
  if (grad_y.shape() != cache.xhat.shape()) {
    throw DimensionError(fmt::format("layernorm_backward: grad {} vs cached {}",
                                     shape_str(grad_y.shape()), shape_str(cache.xhat.shape())));
  }
  const std::size_t batch = grad_y.dim(0);
  const std::size_t m = grad_y.size() / batch;
  LayerNormGrads g{Tensor(grad_y.shape()), Tensor(gain.shape()), Tensor(gain.shape())};
  std::vector<double> dxhat(m);
  for (std::size_t b = 0; b < batch; ++b) {
    const double* gy = grad_y.data() + b * m;
    const double* xh = cache.xhat.data() + b * m;
    double mean_d = 0.0;
    double mean_dx = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      dxhat[i] = gy[i] * gain[i];
      g.grad_gain[i] += gy[i] * xh[i];
      g.grad_bias[i] += gy[i];
      mean_d += dxhat[i];
      mean_dx += dxhat[i] * xh[i];
    }
    mean_d /= static_cast<double>(m);
    mean_dx /= static_cast<double>(m);
    const double inv = cache.inv_std[b];
    double* gx = g.grad_x.data() + b * m;
    for (std::size_t i = 0; i < m; ++i) gx[i] = inv * (dxhat[i] - mean_d - xh[i] * mean_dx);
  }
  return g;
}

Tensor leaky_relu(const Tensor& x, double slope) {
  Tensor y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] >= 0.0 ? x[i] : slope * x[i];
  return y;
}

Tensor leaky_relu_backward(const Tensor& grad_y, const Tensor& x, double slope) {
  if (grad_y.shape() != x.shape()) throw DimensionError("leaky_relu_backward: shape mismatch");
  Tensor g(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) g[i] = x[i] >= 0.0 ? grad_y[i] : slope * grad_y[i];
  return g;
}

double glorot_bound(const Shape& shape) {
  std::size_t fan_in = 0, fan_out = 0;
  if (shape.size() == 2) {
    fan_out = shape[0];
    fan_in = shape[1];
  } else if (shape.size() == 3) {
    fan_out = shape[0] * shape[2];
    fan_in = shape[1] * shape[2];
  } else {
    throw DimensionError("glorot_init: unsupported rank for shape " + shape_str(shape));
  }
  return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

Tensor glorot_init(const Shape& shape, std::mt19937_64& rng) {
  const double a = glorot_bound(shape);
  Tensor t(shape);
  std::uniform_real_distribution<double> dist(-a, a);
  for (double& v : t.values()) v = dist(rng);
  return t;
}

// ---- model ----------------------------------------------------------------

namespace {

std::string conv_name(std::size_t i) { return fmt::format("conv{}", i); }
std::string dense_name(std::size_t i) { return fmt::format("dense{}", i); }

Tensor add_channel_bias(Tensor y, const Tensor& bias) {
  const std::size_t batch = y.dim(0), ch = y.dim(1), len = y.dim(2);
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t c = 0; c < ch; ++c) {
      double* row = y.data() + (b * ch + c) * len;
      for (std::size_t t = 0; t < len; ++t) row[t] += bias[c];
    }
  return y;
}

Tensor channel_bias_grad(const Tensor& gy) {
  const std::size_t batch = gy.dim(0), ch = gy.dim(1), len = gy.dim(2);
  Tensor g({ch});
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t c = 0; c < ch; ++c) {
      const double* row = gy.data() + (b * ch + c) * len;
      double s = 0.0;
      for (std::size_t t = 0; t < len; ++t) s += row[t];
      g[c] += s;
    }
  return g;
}

Shape signature_of(const ParamSet& params) {
  Shape sig;
  for (const auto& e : params) sig.push_back(e.value.size());
  return sig;
}

}  // namespace

void ModelConfig::validate() const {
  sinc_constants().validate();
  if (sinc_filters == 0) throw ConfigError("model: sinc filter count must be positive");
  if (conv_filters.size() != conv_kernels.size()) {
    throw ConfigError(fmt::format("model: {} conv filter counts but {} kernel sizes",
                                  conv_filters.size(), conv_kernels.size()));
  }
  if (pool_widths.size() != conv_filters.size() + 1) {
    throw ConfigError(fmt::format("model: need {} pool widths (sinc block + conv blocks), got {}",
                                  conv_filters.size() + 1, pool_widths.size()));
  }
  for (auto v : conv_filters)
    if (v == 0) throw ConfigError("model: conv filter counts must be positive");
  for (auto v : conv_kernels)
    if (v == 0) throw ConfigError("model: conv kernel sizes must be positive");
  for (auto v : pool_widths)
    if (v == 0) throw ConfigError("model: pool widths must be positive");
  for (auto v : dense_widths)
    if (v == 0) throw ConfigError("model: dense widths must be positive");
  if (!(leaky_slope >= 0.0)) throw ConfigError("model: leaky slope must be >= 0");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("model: dropout must lie in [0,1)");
  if (num_speakers < 2) throw ConfigError("model: need at least 2 speakers");
  (void)flatten_size();
}

sinc::SincConstants ModelConfig::sinc_constants() const {
  return {sinc_min_low_hz, sinc_min_band_hz, sinc_len, sample_rate_hz};
}

std::vector<std::pair<std::size_t, std::size_t>> ModelConfig::block_extents() const {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  auto stage = [&](const char* what, std::size_t len, std::size_t kernel) {
    if (kernel > len) {
      throw ConfigError(fmt::format("model: {} kernel {} exceeds its input length {}", what, kernel, len));
    }
    return len - kernel + 1;
  };
  std::size_t len = stage("sinc", frame_len, sinc_len) / pool_widths.at(0);
  if (len == 0) throw ConfigError("model: sinc block pools to zero length");
  out.emplace_back(sinc_filters, len);
  for (std::size_t i = 0; i < conv_filters.size(); ++i) {
    len = stage("conv", len, conv_kernels[i]) / pool_widths.at(i + 1);
    if (len == 0) throw ConfigError(fmt::format("model: conv block {} pools to zero length", i));
    out.emplace_back(conv_filters[i], len);
  }
  return out;
}

std::size_t ModelConfig::flatten_size() const {
  const auto last = block_extents().back();
  return last.first * last.second;
}

std::size_t ModelConfig::embedding_dim() const {
  return dense_widths.empty() ? flatten_size() : dense_widths.back();
}

ModelConfig desk_model_config(std::size_t num_speakers, std::size_t frame_len) {
  ModelConfig c;
  c.frame_len = frame_len;
  c.sinc_filters = 16;
  c.sinc_len = 101;
  c.conv_filters = {8, 8};
  c.conv_kernels = {5, 5};
  c.pool_widths = {3, 3, 3};
  c.dense_widths = {64, 64, 64};
  c.num_speakers = num_speakers;
  return c;
}

Model init_model(const ModelConfig& config, std::mt19937_64& rng) {
  config.validate();
  Model m{config, {}};
  auto& p = m.params;
  const auto blocks = config.block_extents();

  p.add("input_norm.gain", Tensor({config.frame_len}, 1.0));
  p.add("input_norm.bias", Tensor({config.frame_len}));
  const auto sp = sinc::mel_init(config.sinc_filters, config.sinc_constants());
  p.add("sinc.f1_raw", sp.f1_raw);
  p.add("sinc.band_raw", sp.band_raw);
  p.add("sinc_norm.gain", Tensor({blocks[0].first, blocks[0].second}, 1.0));
  p.add("sinc_norm.bias", Tensor({blocks[0].first, blocks[0].second}));

  std::size_t in_ch = config.sinc_filters;
  for (std::size_t i = 0; i < config.conv_filters.size(); ++i) {
    const auto name = conv_name(i);
    p.add(name + ".weight", glorot_init({config.conv_filters[i], in_ch, config.conv_kernels[i]}, rng));
    p.add(name + ".bias", Tensor({config.conv_filters[i]}));
    p.add(name + "_norm.gain", Tensor({blocks[i + 1].first, blocks[i + 1].second}, 1.0));
    p.add(name + "_norm.bias", Tensor({blocks[i + 1].first, blocks[i + 1].second}));
    in_ch = config.conv_filters[i];
  }
  std::size_t in_dim = config.flatten_size();
  for (std::size_t i = 0; i < config.dense_widths.size(); ++i) {
    const auto name = dense_name(i);
    p.add(name + ".weight", glorot_init({config.dense_widths[i], in_dim}, rng));
    p.add(name + ".bias", Tensor({config.dense_widths[i]}));
    p.add(name + "_norm.gain", Tensor({config.dense_widths[i]}, 1.0));
    p.add(name + "_norm.bias", Tensor({config.dense_widths[i]}));
    in_dim = config.dense_widths[i];
  }
  p.add(kClassifierName, glorot_init({config.num_speakers, in_dim}, rng));
  return m;
}

sinc::SincParams sinc_params(const Model& model) {
  return {model.params["sinc.f1_raw"], model.params["sinc.band_raw"],
          model.config.sinc_constants()};
}

ModelForward model_forward(const Model& model, const Tensor& frames, const ForwardOptions& opts) {
  const auto& cfg = model.config;
  const auto& p = model.params;
  if (frames.rank() != 2 || frames.dim(1) != cfg.frame_len) {
    throw DimensionError(fmt::format("model_forward[input]: expected [B,{}], got {}", cfg.frame_len,
                                     shape_str(frames.shape())));
  }
  ModelForward out;
  auto& cache = out.cache;
  cache.params_signature = signature_of(p);
  const std::size_t batch = frames.dim(0);
  cache.batch = batch;

  auto in_norm = layernorm_forward(frames, p["input_norm.gain"], p["input_norm.bias"]);
  cache.input_norm = std::move(in_norm.cache);

  auto sinc_out = sinc::sinc_forward(std::move(in_norm.y).reshaped({batch, 1, cfg.frame_len}),
                                     sinc_params(model));
  cache.sinc = std::move(sinc_out.cache);

  Tensor act;
  const std::size_t num_blocks = cfg.conv_filters.size() + 1;
  cache.blocks.resize(num_blocks);
  for (std::size_t blk = 0; blk < num_blocks; ++blk) {
    auto& bc = cache.blocks[blk];
    Tensor y;
    std::string norm_name;
    if (blk == 0) {
      bc.conv_out = std::move(sinc_out.y);
      y = bc.conv_out;
      if (cfg.rectify) {
        for (double& v : y.values()) v = std::abs(v);
      }
      norm_name = "sinc_norm";
    } else {
      const auto name = conv_name(blk - 1);
      cache.conv_inputs.push_back(act);
      y = add_channel_bias(ndarr::conv1d_forward(act, p[name + ".weight"], 1), p[name + ".bias"]);
      norm_name = name + "_norm";
    }
    bc.pool_in_shape = y.shape();
    auto pooled = ndarr::maxpool1d(y, cfg.pool_widths[blk]);
    bc.argmax = std::move(pooled.argmax);
    auto normed = layernorm_forward(pooled.y, p[norm_name + ".gain"], p[norm_name + ".bias"]);
    bc.norm = std::move(normed.cache);
    bc.norm_out = std::move(normed.y);
    act = leaky_relu(bc.norm_out, cfg.leaky_slope);
  }

  cache.flatten_from = act.shape();
  Tensor h = std::move(act).reshaped({batch, cfg.flatten_size()});
  cache.dense.resize(cfg.dense_widths.size());
  const bool drop = opts.training && cfg.dropout > 0.0;
  if (drop && opts.dropout_rng == nullptr) throw ConfigError("model_forward: dropout needs an rng");
  for (std::size_t i = 0; i < cfg.dense_widths.size(); ++i) {
    const auto name = dense_name(i);
    auto& dc = cache.dense[i];
    dc.input = h;
    Tensor z = ndarr::matmul_a_bt(h, p[name + ".weight"]);
    const Tensor& bias = p[name + ".bias"];
    const std::size_t width = cfg.dense_widths[i];
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t j = 0; j < width; ++j) z[b * width + j] += bias[j];
    auto normed = layernorm_forward(z, p[name + "_norm.gain"], p[name + "_norm.bias"]);
    dc.norm = std::move(normed.cache);
    dc.norm_out = std::move(normed.y);
    h = leaky_relu(dc.norm_out, cfg.leaky_slope);
    if (drop) {
      std::bernoulli_distribution keep(1.0 - cfg.dropout);
      const double scale = 1.0 / (1.0 - cfg.dropout);
      dc.dropout_mask.resize(h.size());
      for (std::size_t k = 0; k < h.size(); ++k) {
        dc.dropout_mask[k] = keep(*opts.dropout_rng) ? scale : 0.0;
        h[k] *= dc.dropout_mask[k];
      }
    }
  }
  out.embeddings = std::move(h);
  ensure_finite(out.embeddings, "model_forward[embeddings]");
  return out;
}

ParamSet model_backward(const Tensor& grad_embeddings, const ForwardCache& cache, const Model& model) {
  const auto& cfg = model.config;
  const auto& p = model.params;
  if (cache.params_signature != signature_of(p)) {
    throw DimensionError("model_backward: cache was produced by a model with a different layout");
  }
  const Shape emb_shape{cache.batch, cfg.embedding_dim()};
  if (grad_embeddings.shape() != emb_shape) {
    throw DimensionError(fmt::format("model_backward: gradient {} does not match embeddings {}",
                                     shape_str(grad_embeddings.shape()), shape_str(emb_shape)));
  }
  ParamSet grads = p.zeros_like();
  const std::size_t batch = cache.batch;

  Tensor g = grad_embeddings;
  for (std::size_t i = cfg.dense_widths.size(); i-- > 0;) {
    const auto name = dense_name(i);
    const auto& dc = cache.dense[i];
    if (!dc.dropout_mask.empty()) {
      for (std::size_t k = 0; k < g.size(); ++k) g[k] *= dc.dropout_mask[k];
    }
    g = leaky_relu_backward(g, dc.norm_out, cfg.leaky_slope);
    auto ln = layernorm_backward(g, dc.norm, p[name + "_norm.gain"]);
    grads[name + "_norm.gain"] = std::move(ln.grad_gain);
    grads[name + "_norm.bias"] = std::move(ln.grad_bias);
    const Tensor& gz = ln.grad_x;
    grads[name + ".weight"] = ndarr::matmul_at_b(gz, dc.input);
    Tensor gb({cfg.dense_widths[i]});
    const std::size_t width = cfg.dense_widths[i];
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t j = 0; j < width; ++j) gb[j] += gz[b * width + j];
    grads[name + ".bias"] = std::move(gb);
    g = ndarr::matmul(gz, p[name + ".weight"]);
  }

  g = std::move(g).reshaped(cache.flatten_from);
  for (std::size_t blk = cache.blocks.size(); blk-- > 0;) {
    const auto& bc = cache.blocks[blk];
    const std::string norm_name = blk == 0 ? "sinc_norm" : conv_name(blk - 1) + "_norm";
    g = leaky_relu_backward(g, bc.norm_out, cfg.leaky_slope);
    auto ln = layernorm_backward(g, bc.norm, p[norm_name + ".gain"]);
    grads[norm_name + ".gain"] = std::move(ln.grad_gain);
    grads[norm_name + ".bias"] = std::move(ln.grad_bias);
    g = ndarr::maxpool1d_backward(ln.grad_x, bc.argmax, bc.pool_in_shape);
    if (blk == 0) {
      if (cfg.rectify) {
        for (std::size_t k = 0; k < g.size(); ++k) {
          const double v = bc.conv_out[k];
          g[k] *= v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0);
        }
      }
      auto sg = sinc::sinc_backward(g, cache.sinc, sinc_params(model));
      grads["sinc.f1_raw"] = std::move(sg.grad_f1_raw);
      grads["sinc.band_raw"] = std::move(sg.grad_band_raw);
      g = std::move(sg.grad_x).reshaped({batch, cfg.frame_len});
    } else {
      const auto name = conv_name(blk - 1);
      grads[name + ".bias"] = channel_bias_grad(g);
      auto cg = ndarr::conv1d_backward(g, cache.conv_inputs[blk - 1], p[name + ".weight"], 1);
      grads[name + ".weight"] = std::move(cg.grad_k);
      g = std::move(cg.grad_x);
    }
  }
  auto ln = layernorm_backward(g, cache.input_norm, p["input_norm.gain"]);
  grads["input_norm.gain"] = std::move(ln.grad_gain);
  grads["input_norm.bias"] = std::move(ln.grad_bias);
  return grads;
}

}  // namespace amsinc::net
