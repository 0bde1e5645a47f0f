// Copyright 2026 The amsinc Authors
//
// Licensed under the Apache License, Version 2.0

#pragma once

#include <cstdint>

#include "amsinc/params.hpp"

namespace amsinc::optim {

struct OptimConfig {
  double lr = 0.001;
  double alpha = 0.95;
  double eps = 1e-7;

  void validate() const;
};

/// Squared-gradient running averages, one per parameter, plus a step count.
struct OptimState {
  ParamSet v;
  std::uint64_t step = 0;
};

OptimState init_state(const ParamSet& params);

/// v ← α·v + (1−α)·g²;  θ ← θ − lr·g/(√v + eps).
///
/// Throws NumericError naming the tensor and index of the first non-finite
/// gradient; params and state are untouched in that case.
void rmsprop_step(ParamSet& params, const ParamSet& grads, OptimState& state, const OptimConfig& cfg);

}  // namespace amsinc::optim
