// Copyright 2026 The amsinc Authors
//
// Licensed under the Apache License, Version 2.0

#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "amsinc/network.hpp"
#include "amsinc/tensor.hpp"

namespace amsinc::gradcheck {

enum class Size { kTiny, kSmall };
Size parse_size(const std::string& s);

inline constexpr double kDefaultStep = 1e-6;
inline constexpr double kSincStep = 1e-7;

/// ‖a − b‖₂ / max(‖a‖₂, ‖b‖₂, 1e-8).
double rel_error(std::span<const double> a, std::span<const double> b);

/// Central differences of f with respect to every coordinate of x, which
/// is perturbed in place and restored.
Tensor numeric_gradient(const std::function<double()>& f, Tensor& x, double h = kDefaultStep);

struct Check {
  std::string module;
  std::string name;
  double rel_error = 0.0;
  std::size_t scalars = 0;
};

struct Report {
  std::vector<Check> checks;

  double worst() const;
  /// (module, worst error) in the order modules first appear.
  std::vector<std::pair<std::string, double>> worst_per_module() const;
};

/// T=400, F=2, L=17, conv 2×5 twice, dense 8, C=3.
net::ModelConfig tiny_model_config();
/// T=800, F=4, L=33, conv 4×5 twice, dense 16 twice, C=4.
net::ModelConfig small_model_config();

/// Every analytic gradient in the stack against central differences: the
/// dense kernels, the sinc layer, the network layers, both loss heads, and
/// the whole model under each head.
Report run_suite(Size size, std::uint64_t seed = 1);

}  // namespace amsinc::gradcheck
