// Copyright 2026 The amsinc Authors
//
// Licensed under the Apache License, Version 2.0

#include "amsinc/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "amsinc/error.hpp"
#include "amsinc/loss.hpp"
#include "amsinc/ndarr.hpp"
#include "amsinc/sincbank.hpp"

namespace amsinc::gradcheck {

namespace {

Tensor uniform(const Shape& shape, double lo, double hi, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> d(lo, hi);
  Tensor t(shape);
  for (double& v : t.values()) v = d(rng);
  return t;
}

/// Values with |v| in [lo, hi] and random sign.
Tensor away_from_zero(const Shape& shape, double lo, double hi, std::mt19937_64& rng) {
  Tensor t = uniform(shape, lo, hi, rng);
  std::bernoulli_distribution flip(0.5);
  for (double& v : t.values())
    if (flip(rng)) v = -v;
  return t;
}

double dot(const Tensor& a, const Tensor& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

std::vector<int> random_labels(std::size_t n, std::size_t classes, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> d(0, static_cast<int>(classes) - 1);
  std::vector<int> y(n);
  for (auto& v : y) v = d(rng);
  return y;
}

class Suite {
 public:
  explicit Suite(std::uint64_t seed) : rng_(seed) {}

  void add(const std::string& module, const std::string& name, const Tensor& analytic, const std::function<double()>& f,
           Tensor& x, double h = kDefaultStep) {
    const Tensor numeric = numeric_gradient(f, x, h);
    report_.checks.push_back({module, name, rel_error(analytic.values(), numeric.values()), x.size()});
  }

  void ndarr() {
    Tensor x = uniform({2, 2, 12}, -1, 1, rng_), k = uniform({3, 2, 3}, -1, 1, rng_);
    for (std::size_t stride : {1u, 2u}) {
      const Tensor r = uniform(ndarr::conv1d_forward(x, k, stride).shape(), -1, 1, rng_);
      const auto g = ndarr::conv1d_backward(r, x, k, stride);
      auto f = [&] { return dot(ndarr::conv1d_forward(x, k, stride), r); };
      const std::string tag = "conv1d(stride " + std::to_string(stride) + ")";
      add("ndarr", tag + ".x", g.grad_x, f, x);
      add("ndarr", tag + ".k", g.grad_k, f, k);
    }
    Tensor a = uniform({4, 5}, -1, 1, rng_), b = uniform({5, 3}, -1, 1, rng_);
    const Tensor r = uniform({4, 3}, -1, 1, rng_);
    auto f = [&] { return dot(ndarr::matmul(a, b), r); };
    add("ndarr", "matmul.a", ndarr::matmul_a_bt(r, b), f, a);
    add("ndarr", "matmul.b", ndarr::matmul_at_b(a, r), f, b);

    Tensor p = uniform({2, 3, 10}, -1, 1, rng_);
    const auto pooled = ndarr::maxpool1d(p, 3);
    const Tensor rp = uniform(pooled.y.shape(), -1, 1, rng_);
    add("ndarr", "maxpool1d.x", ndarr::maxpool1d_backward(rp, pooled.argmax, p.shape()),
        [&] { return dot(ndarr::maxpool1d(p, 3).y, rp); }, p);
  }

  void sincbank(Size size) {
    const bool tiny = size == Size::kTiny;
    const std::size_t filters = tiny ? 3 : 5, len = tiny ? 17 : 33, T = tiny ? 64 : 128;
    sinc::SincParams p{away_from_zero({filters}, 0.01, 0.15, rng_), away_from_zero({filters}, 0.01, 0.1, rng_),
                       {50.0, 50.0, len, 16000}};
    Tensor x = uniform({2, 1, T}, -1, 1, rng_);
    const auto fwd = sinc::sinc_forward(x, p);
    const Tensor r = uniform(fwd.y.shape(), -1, 1, rng_);
    const auto g = sinc::sinc_backward(r, fwd.cache, p);
    auto f = [&] { return dot(sinc::sinc_forward(x, p).y, r); };
    add("sincbank", "sinc.f1_raw", g.grad_f1_raw, f, p.f1_raw, kSincStep);
    add("sincbank", "sinc.band_raw", g.grad_band_raw, f, p.band_raw, kSincStep);
    add("sincbank", "sinc.x", g.grad_x, f, x);
  }

  void network() {
    Tensor x = uniform({2, 3, 5}, -2, 2, rng_), gain = uniform({3, 5}, 0.5, 1.5, rng_),
           bias = uniform({3, 5}, -0.5, 0.5, rng_);
    const auto fwd = net::layernorm_forward(x, gain, bias);
    const Tensor r = uniform(x.shape(), -1, 1, rng_);
    const auto g = net::layernorm_backward(r, fwd.cache, gain);
    auto f = [&] { return dot(net::layernorm_forward(x, gain, bias).y, r); };
    add("network", "layernorm.x", g.grad_x, f, x);
    add("network", "layernorm.gain", g.grad_gain, f, gain);
    add("network", "layernorm.bias", g.grad_bias, f, bias);

    Tensor z = away_from_zero({4, 6}, 0.01, 2, rng_);
    const Tensor rz = uniform(z.shape(), -1, 1, rng_);
    add("network", "leaky_relu.x", net::leaky_relu_backward(rz, z, 0.2),
        [&] { return dot(net::leaky_relu(z, 0.2), rz); }, z);
  }

  void loss(Size size) {
    const bool tiny = size == Size::kTiny;
    const std::size_t n = tiny ? 6 : 8, d = tiny ? 8 : 16, classes = tiny ? 4 : 10;
    Tensor f = uniform({n, d}, -1, 1, rng_), W = uniform({classes, d}, -1, 1, rng_);
    const auto y = random_labels(n, classes, rng_);

    loss::LossConfig am;
    am.kind = loss::LossKind::kAmSoftmax;
    am.margin = 0.35;
    const auto oa = loss::am_softmax(f, W, y, am);
    auto fa = [&] { return loss::am_softmax(f, W, y, am).loss; };
    add("loss", "am_softmax.f", oa.grad_embeddings, fa, f);
    add("loss", "am_softmax.W", oa.grad_W, fa, W);

    for (const bool normalized : {false, true}) {
      loss::LossConfig sm;
      sm.kind = loss::LossKind::kSoftmax;
      sm.normalize_baseline = normalized;
      const auto os = loss::softmax_ce(f, W, y, sm);
      auto fs = [&] { return loss::softmax_ce(f, W, y, sm).loss; };
      const std::string tag = normalized ? "softmax_ce(normalized)" : "softmax_ce";
      add("loss", tag + ".f", os.grad_embeddings, fs, f);
      add("loss", tag + ".W", os.grad_W, fs, W);
    }

    Tensor v = uniform({3, 5}, -1, 1, rng_);
    const Tensor rv = uniform(v.shape(), -1, 1, rng_);
    add("loss", "l2_normalize_rows.x", loss::l2_normalize_rows_backward(rv, v),
        [&] { return dot(loss::l2_normalize_rows(v), rv); }, v);
  }

  void model(Size size) {
    net::ModelConfig cfg = size == Size::kTiny ? tiny_model_config() : small_model_config();
    std::mt19937_64 init_rng(rng_());
    net::Model m = net::init_model(cfg, init_rng);
    // Pull the top filter off the Nyquist clamp and jitter the affine maps.
    for (double& v : m.params["sinc.band_raw"].values()) v *= 0.9;
    for (auto& e : m.params) {
      if (e.name.find("_norm.") != std::string::npos || e.name.ends_with(".bias")) {
        const Tensor j = uniform(e.value.shape(), -0.1, 0.1, rng_);
        for (std::size_t i = 0; i < e.value.size(); ++i) e.value[i] += j[i];
      }
    }
    const std::size_t batch = size == Size::kTiny ? 2 : 3;
    const Tensor frames = uniform({batch, cfg.frame_len}, -1, 1, rng_);
    const auto y = random_labels(batch, cfg.num_speakers, rng_);

    for (const auto kind : {loss::LossKind::kAmSoftmax, loss::LossKind::kSoftmax}) {
      loss::LossConfig lc;
      lc.kind = kind;
      lc.margin = 0.35;
      auto total = [&] {
        const auto fwd = net::model_forward(m, frames);
        return loss::compute_loss(fwd.embeddings, m.params[net::kClassifierName], y, lc).loss;
      };
      const auto fwd = net::model_forward(m, frames);
      const auto out = loss::compute_loss(fwd.embeddings, m.params[net::kClassifierName], y, lc);
      ParamSet grads = net::model_backward(out.grad_embeddings, fwd.cache, m);
      grads[net::kClassifierName] = out.grad_W;
      const std::string module = kind == loss::LossKind::kAmSoftmax ? "model+am_softmax" : "model+softmax";
      for (auto& e : m.params) {
        const double h = e.name.starts_with("sinc.") && e.name.ends_with("_raw") ? kSincStep : kDefaultStep;
        add(module, e.name, grads[e.name], total, e.value, h);
      }
    }
  }

  Report take() { return std::move(report_); }

 private:
  std::mt19937_64 rng_;
  Report report_;
};

}  // namespace

Size parse_size(const std::string& s) {
  if (s == "tiny") return Size::kTiny;
  if (s == "small") return Size::kSmall;
  throw ConfigError("unknown gradcheck size '" + s + "' (expected tiny or small)");
}

double rel_error(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DimensionError("rel_error: length mismatch");
  double diff = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return std::sqrt(diff) / std::max({std::sqrt(na), std::sqrt(nb), 1e-8});
}

Tensor numeric_gradient(const std::function<double()>& f, Tensor& x, double h) {
  Tensor g = Tensor::zeros_like(x);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double v = x[i];
    x[i] = v + h;
    const double fp = f();
    x[i] = v - h;
    const double fm = f();
    x[i] = v;
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

double Report::worst() const {
  double w = 0.0;
  for (const auto& c : checks) w = std::max(w, c.rel_error);
  return w;
}

std::vector<std::pair<std::string, double>> Report::worst_per_module() const {
  std::vector<std::pair<std::string, double>> out;
  for (const auto& c : checks) {
    auto it = std::find_if(out.begin(), out.end(), [&](const auto& p) { return p.first == c.module; });
    if (it == out.end()) {
      out.emplace_back(c.module, c.rel_error);
    } else {
      it->second = std::max(it->second, c.rel_error);
    }
  }
  return out;
}

net::ModelConfig tiny_model_config() {
  net::ModelConfig c;
  c.frame_len = 400;
  c.sinc_filters = 2;
  c.sinc_len = 17;
  c.conv_filters = {2, 2};
  c.conv_kernels = {5, 5};
  c.pool_widths = {3, 3, 3};
  c.dense_widths = {8};
  c.num_speakers = 3;
  return c;
}

net::ModelConfig small_model_config() {
  net::ModelConfig c;
  c.frame_len = 800;
  c.sinc_filters = 4;
  c.sinc_len = 33;
  c.conv_filters = {4, 4};
  c.conv_kernels = {5, 5};
  c.pool_widths = {3, 3, 3};
  c.dense_widths = {16, 16};
  c.num_speakers = 4;
  return c;
}

Report run_suite(Size size, std::uint64_t seed) {
  Suite s(seed);
  s.ndarr();
  s.sincbank(size);
  s.network();
  s.loss(size);
  s.model(size);
  return s.take();
}

}  // namespace amsinc::gradcheck
