// Copyright 2026 The amsinc Authors
//
// Licensed under the Apache License, Version 2.0

#pragma once

#include <cstddef>
#include <functional>

namespace amsinc {

/// Caps the worker count used by batch-parallel kernels (minimum 1).
void set_num_threads(std::size_t n);
std::size_t num_threads();

/// Runs fn(i) for i in [0, n), split into contiguous ranges across workers.
/// Callers must only write to disjoint outputs per index.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace amsinc
