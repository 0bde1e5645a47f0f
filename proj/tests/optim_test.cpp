// Copyright 2026 The amsinc Authors
//
// Licensed under the Apache License, Version 2.0

#include <cmath>
#include <limits>
#include <random>

#include <gtest/gtest.h>

#include "amsinc/error.hpp"
#include "amsinc/optim.hpp"
#include "support/oracles.hpp"

namespace amsinc::optim {
namespace {

ParamSet single(double v) {
  ParamSet p;
  p.add("w", Tensor({1}, v));
  return p;
}

TEST(Rmsprop, FirstStepByHand) {
  ParamSet p = single(0.0);
  OptimState st = init_state(p);
  rmsprop_step(p, single(1.0), st, {});
  EXPECT_EQ(st.v["w"][0], 1.0 - 0.95);
  EXPECT_NEAR(st.v["w"][0], 0.05, 1e-16);
  EXPECT_NEAR(-p["w"][0], 0.001 / (std::sqrt(0.05) + 1e-7), 1e-15);
  EXPECT_NEAR(-p["w"][0], 0.004472133955000474, 1e-9);
  EXPECT_EQ(st.step, 1u);
}

TEST(Rmsprop, ZeroGradientDecaysStateOnly) {
  ParamSet p = single(2.0);
  OptimState st = init_state(p);
  st.v["w"][0] = 0.4;
  rmsprop_step(p, single(0.0), st, {});
  EXPECT_EQ(p["w"][0], 2.0);
  EXPECT_DOUBLE_EQ(st.v["w"][0], 0.95 * 0.4);
}

TEST(Rmsprop, StepOpposesGradientAndStateStaysNonnegative) {
  std::mt19937_64 rng(61);
  ParamSet p;
  p.add("a", oracle::random_tensor({30}, rng));
  p.add("b", oracle::random_tensor({4, 5}, rng));
  OptimState st = init_state(p);
  std::uniform_real_distribution<double> exponent(-8.0, 8.0);
  std::bernoulli_distribution zero(0.1);
  for (int step = 0; step < 200; ++step) {
    ParamSet g = p.zeros_like();
    for (auto& e : g)
      for (double& v : e.value.values())
        v = zero(rng) ? 0.0 : (rng() % 2 ? 1.0 : -1.0) * std::pow(10.0, exponent(rng));
    const ParamSet before = p;
    rmsprop_step(p, g, st, {});
    for (const auto& e : g) {
      const Tensor& old = before[e.name];
      const Tensor& now = p[e.name];
      for (std::size_t i = 0; i < e.value.size(); ++i) {
        const double d = now[i] - old[i];
        const double step = 0.001 * e.value[i] / (std::sqrt(st.v[e.name][i]) + 1e-7);
        const bool visible = std::abs(step) > 4.0 * std::abs(std::nextafter(old[i], 2.0 * old[i] + 1.0) - old[i]);
        if (e.value[i] > 0) ASSERT_LE(d, 0.0);
        if (e.value[i] < 0) ASSERT_GE(d, 0.0);
        if (visible) ASSERT_NE(d, 0.0);
        ASSERT_LE(std::abs(d), 0.001 * std::abs(e.value[i]) / 1e-7 * (1 + 1e-12));
      }
    }
    for (const auto& e : st.v)
      for (double v : e.value.values()) ASSERT_GE(v, 0.0);
  }
}

TEST(Rmsprop, FirstStepMagnitudeIndependentOfScale) {
  const double expected = 0.001 / std::sqrt(1.0 - 0.95);
  for (double g : {1e-6, 1.0, 1e6}) {
    ParamSet p = single(0.0);
    OptimState st = init_state(p);
    OptimConfig cfg;
    if (g < 1e-3) cfg.eps = 1e-12;
    rmsprop_step(p, single(g), st, cfg);
    EXPECT_LT(std::abs(std::abs(p["w"][0]) - expected) / expected, 0.01) << g;
  }
}

TEST(Rmsprop, NonFiniteGradientAbortsWithoutMutation) {
  ParamSet p;
  p.add("a", Tensor({3}, 1.0));
  p.add("b", Tensor({2}, 1.0));
  OptimState st = init_state(p);
  ParamSet g = p.zeros_like();
  g["a"][0] = 0.5;
  g["b"][1] = std::numeric_limits<double>::quiet_NaN();
  const ParamSet before = p;
  try {
    rmsprop_step(p, g, st, {});
    FAIL();
  } catch (const NumericError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("b[1]"), std::string::npos) << msg;
  }
  EXPECT_EQ(p, before);
  EXPECT_EQ(st.step, 0u);
  EXPECT_EQ(st.v, init_state(p).v);
}

TEST(Rmsprop, LayoutMismatchIsRejected) {
  ParamSet p = single(0.0);
  OptimState st = init_state(p);
  ParamSet g;
  g.add("v", Tensor({1}, 1.0));
  EXPECT_THROW(rmsprop_step(p, g, st, {}), DimensionError);
}

TEST(Rmsprop, ConfigValidation) {
  EXPECT_THROW((OptimConfig{-1.0, 0.95, 1e-7}).validate(), ConfigError);
  EXPECT_THROW((OptimConfig{0.001, 1.0, 1e-7}).validate(), ConfigError);
  EXPECT_THROW((OptimConfig{0.001, 0.95, 0.0}).validate(), ConfigError);
  EXPECT_NO_THROW((OptimConfig{0.0, 0.95, 1e-7}).validate());
}

}  // namespace
}  // namespace amsinc::optim
