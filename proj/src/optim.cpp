// Copyright 2026 The amsinc Authors
//
// Licensed under the Apache License, Version 2.0

#include "amsinc/optim.hpp"

#include <cmath>

#include <fmt/format.h>

#include "amsinc/error.hpp"

namespace amsinc::optim {

void OptimConfig::validate() const {
  if (!(lr >= 0.0) || !std::isfinite(lr)) throw ConfigError(fmt::format("optim: lr must be >= 0, got {}", lr));
  if (!(alpha >= 0.0 && alpha < 1.0)) throw ConfigError(fmt::format("optim: alpha must lie in [0,1), got {}", alpha));
  if (!(eps > 0.0)) throw ConfigError(fmt::format("optim: eps must be > 0, got {}", eps));
}

OptimState init_state(const ParamSet& params) { return {params.zeros_like(), 0}; }

void rmsprop_step(ParamSet& params, const ParamSet& grads, OptimState& state, const OptimConfig& cfg) {
  cfg.validate();
  if (!params.same_layout(grads)) throw DimensionError("rmsprop_step: gradient registry does not match parameters");
  if (!params.same_layout(state.v)) throw DimensionError("rmsprop_step: optimizer state does not match parameters");
  for (const auto& g : grads) {
    const auto vals = g.value.values();
    for (std::size_t i = 0; i < vals.size(); ++i) {
      if (!std::isfinite(vals[i])) {
        throw NumericError(fmt::format("rmsprop_step: non-finite gradient {} at {}[{}] (step {})", vals[i], g.name, i,
                                       state.step));
      }
    }
  }
  auto p = params.begin();
  auto v = state.v.begin();
  for (auto g = grads.begin(); g != grads.end(); ++g, ++p, ++v) {
    double* theta = p->value.data();
    double* acc = v->value.data();
    const double* grad = g->value.data();
    for (std::size_t i = 0, n = g->value.size(); i < n; ++i) {
      acc[i] = cfg.alpha * acc[i] + (1.0 - cfg.alpha) * grad[i] * grad[i];
      theta[i] -= cfg.lr * grad[i] / (std::sqrt(acc[i]) + cfg.eps);
    }
  }
  ++state.step;
}

}  // namespace amsinc::optim
