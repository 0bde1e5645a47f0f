// Copyright 2026 The amsinc Authors
//
// Licensed under the Apache License, Version 2.0

#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "amsinc/error.hpp"
#include "amsinc/gradcheck.hpp"
#include "amsinc/network.hpp"
#include "support/oracles.hpp"

namespace amsinc::net {
namespace {

TEST(LayerNorm, ConstantInputGivesZeros) {
  const auto out = layernorm_forward(Tensor({2, 5}, 3.0), Tensor({5}, 1.0), Tensor({5}));
  for (double v : out.y.values()) EXPECT_EQ(v, 0.0);
}

TEST(LayerNorm, NormalizedMoments) {
  std::mt19937_64 rng(41);
  const Tensor x = oracle::random_tensor({3, 4, 6}, rng, -5.0, 9.0);
  const auto out = layernorm_forward(x, Tensor({4, 6}, 1.0), Tensor({4, 6}));
  for (std::size_t b = 0; b < 3; ++b) {
    double mean = 0.0, sq = 0.0;
    for (std::size_t i = 0; i < 24; ++i) mean += out.y[b * 24 + i];
    mean /= 24.0;
    for (std::size_t i = 0; i < 24; ++i) sq += (out.y[b * 24 + i] - mean) * (out.y[b * 24 + i] - mean);
    EXPECT_NEAR(mean, 0.0, 1e-9);
    double var_x = 0.0, mean_x = 0.0;
    for (std::size_t i = 0; i < 24; ++i) mean_x += x[b * 24 + i] / 24.0;
    for (std::size_t i = 0; i < 24; ++i) var_x += (x[b * 24 + i] - mean_x) * (x[b * 24 + i] - mean_x) / 24.0;
    EXPECT_NEAR(sq / 24.0, var_x / (var_x + kLayerNormEps), 1e-9);
  }
}

TEST(LayerNorm, FiniteDifferences) {
  std::mt19937_64 rng(42);
  Tensor x = oracle::random_tensor({3, 7}, rng);
  Tensor gain = oracle::random_tensor({7}, rng, 0.5, 1.5);
  Tensor bias = oracle::random_tensor({7}, rng);
  const Tensor gy = oracle::random_tensor({3, 7}, rng);
  const auto fwd = layernorm_forward(x, gain, bias);
  const auto g = layernorm_backward(gy, fwd.cache, gain);
  auto f = [&] { return oracle::sum_product(layernorm_forward(x, gain, bias).y, gy); };
  EXPECT_LT(oracle::rel_err(g.grad_x, oracle::finite_diff(f, x, 1e-6)), 1e-6);
  EXPECT_LT(oracle::rel_err(g.grad_gain, oracle::finite_diff(f, gain, 1e-6)), 1e-6);
  EXPECT_LT(oracle::rel_err(g.grad_bias, oracle::finite_diff(f, bias, 1e-6)), 1e-6);
}

TEST(LeakyRelu, Values) {
  EXPECT_EQ(leaky_relu(Tensor({1}, 5.0))[0], 5.0);
  EXPECT_DOUBLE_EQ(leaky_relu(Tensor({1}, -2.0), 0.2)[0], -0.4);
}

TEST(LeakyRelu, FiniteDifferencesAwayFromZero) {
  std::mt19937_64 rng(43);
  Tensor x = oracle::random_tensor({40}, rng);
  for (double& v : x.values()) v += v >= 0 ? 0.01 : -0.01;
  const Tensor gy = oracle::random_tensor({40}, rng);
  auto f = [&] { return oracle::sum_product(leaky_relu(x), gy); };
  EXPECT_LT(oracle::rel_err(leaky_relu_backward(gy, x), oracle::finite_diff(f, x, 1e-6)), 1e-6);
}

TEST(Glorot, BoundArithmetic) {
  EXPECT_DOUBLE_EQ(glorot_bound({3, 3}), 1.0);
  std::mt19937_64 rng(44);
  const Tensor w = glorot_init({3, 3}, rng);
  for (double v : w.values()) {
    EXPECT_GE(v, -1.0);
    EXPECT_LE(v, 1.0);
  }
  EXPECT_THROW((void)glorot_init({4}, rng), DimensionError);
}

TEST(Glorot, EmpiricalVariance) {
  std::mt19937_64 rng(45);
  const Tensor w = glorot_init({250, 400}, rng);
  double sq = 0.0;
  for (double v : w.values()) sq += v * v;
  const double var = sq / static_cast<double>(w.size());
  const double expected = 2.0 / 650.0;
  EXPECT_LT(std::abs(var - expected) / expected, 0.05);
}

TEST(Glorot, SameSeedSameTensor) {
  std::mt19937_64 a(46), b(46);
  EXPECT_EQ(glorot_init({8, 3, 5}, a), glorot_init({8, 3, 5}, b));
}

class DeskModel : public ::testing::Test {
 protected:
  DeskModel() : rng_(47), model_(init_model(desk_model_config(4), rng_)) {}
  std::mt19937_64 rng_;
  Model model_;
};

TEST_F(DeskModel, EmbeddingShape) {
  const auto out = model_forward(model_, oracle::random_tensor({3, 3200}, rng_));
  EXPECT_EQ(out.embeddings.shape(), (Shape{3, 64}));
}

TEST_F(DeskModel, DeterministicAndPerSample) {
  Tensor x = oracle::random_tensor({2, 3200}, rng_);
  for (std::size_t t = 0; t < 3200; ++t) x[3200 + t] = x[t];
  const auto a = model_forward(model_, x).embeddings;
  const auto b = model_forward(model_, x).embeddings;
  EXPECT_EQ(a, b);
  for (std::size_t j = 0; j < 64; ++j) EXPECT_EQ(a.at(0, j), a.at(1, j));
}

TEST_F(DeskModel, ZeroInputDependsOnlyOnAffineTerms) {
  const auto a = model_forward(model_, Tensor({1, 3200})).embeddings;
  EXPECT_TRUE(all_finite(a.values()));
  EXPECT_EQ(a, model_forward(model_, Tensor({1, 3200})).embeddings);
}

TEST_F(DeskModel, WrongFrameLengthNamesStage) {
  try {
    (void)model_forward(model_, Tensor({1, 3000}));
    FAIL();
  } catch (const DimensionError& e) {
    EXPECT_NE(std::string(e.what()).find("input"), std::string::npos);
  }
}

TEST_F(DeskModel, ZeroUpstreamGivesZeroRegistry) {
  const auto fwd = model_forward(model_, oracle::random_tensor({2, 3200}, rng_));
  const ParamSet g = model_backward(Tensor({2, 64}), fwd.cache, model_);
  EXPECT_TRUE(g.same_layout(model_.params));
  for (const auto& e : g)
    for (double v : e.value.values()) ASSERT_EQ(v, 0.0) << e.name;
}

TEST_F(DeskModel, EveryParameterReceivesGradient) {
  const auto fwd = model_forward(model_, oracle::random_tensor({4, 3200}, rng_));
  const ParamSet g = model_backward(oracle::random_tensor({4, 64}, rng_), fwd.cache, model_);
  EXPECT_EQ(g.names(), model_.params.names());
  for (const auto& e : g) {
    if (e.name == kClassifierName) continue;
    bool nonzero = false;
    for (double v : e.value.values()) nonzero = nonzero || v != 0.0;
    EXPECT_TRUE(nonzero) << e.name;
  }
}

TEST(ModelShapes, FlattenSizeFollowsClosedForm) {
  for (std::size_t T = 400; T <= 4000; T += 200) {
    ModelConfig cfg = desk_model_config(3, T);
    std::size_t len = (T - cfg.sinc_len + 1) / cfg.pool_widths[0];
    for (std::size_t i = 0; i < cfg.conv_filters.size(); ++i) {
      len = (len - cfg.conv_kernels[i] + 1) / cfg.pool_widths[i + 1];
    }
    EXPECT_EQ(cfg.flatten_size(), cfg.conv_filters.back() * len) << T;
    std::mt19937_64 rng(T);
    const auto model = init_model(cfg, rng);
    const auto fwd = model_forward(model, Tensor({1, T}, 0.5));
    EXPECT_EQ(shape_numel(fwd.cache.flatten_from), cfg.flatten_size()) << T;
  }
}

TEST(ModelGradients, TinyModelFiniteDifferences) {
  std::mt19937_64 rng(48);
  Model model = init_model(gradcheck::tiny_model_config(), rng);
  for (double& v : model.params["sinc.band_raw"].values()) v *= 0.9;
  const Tensor x = oracle::random_tensor({2, 400}, rng);
  const Tensor gy = oracle::random_tensor({2, 8}, rng);
  const auto fwd = model_forward(model, x);
  const ParamSet g = model_backward(gy, fwd.cache, model);
  auto f = [&] { return oracle::sum_product(model_forward(model, x).embeddings, gy); };
  for (const char* name : {"conv0.weight", "conv1.bias", "dense0.weight", "dense0_norm.gain", "sinc_norm.bias"}) {
    EXPECT_LT(oracle::rel_err(g[name], oracle::finite_diff(f, model.params[name], 1e-6)), 1e-5) << name;
  }
  for (const char* name : {"sinc.f1_raw", "sinc.band_raw"}) {
    EXPECT_LT(oracle::rel_err(g[name], oracle::finite_diff(f, model.params[name], 1e-7)), 1e-5) << name;
  }
}

TEST(ModelConfigValidation, RejectsBadExtents) {
  ModelConfig cfg = desk_model_config(4);
  cfg.pool_widths = {3, 3};
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = desk_model_config(4, 120);
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = desk_model_config(1);
  EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(Dropout, OnlyActiveInTraining) {
  ModelConfig cfg = gradcheck::tiny_model_config();
  cfg.dropout = 0.5;
  std::mt19937_64 rng(49);
  const auto model = init_model(cfg, rng);
  const Tensor x = oracle::random_tensor({2, 400}, rng);
  EXPECT_EQ(model_forward(model, x).embeddings, model_forward(model, x).embeddings);
  EXPECT_THROW((void)model_forward(model, x, {.training = true}), ConfigError);
  std::mt19937_64 drop(1);
  EXPECT_NE(model_forward(model, x, {.training = true, .dropout_rng = &drop}).embeddings,
            model_forward(model, x).embeddings);
}

}  // namespace
}  // namespace amsinc::net
