// Copyright 2026 The amsinc Authors
//
// Licensed under the Apache License, Version 2.0

#pragma once

#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "amsinc/tensor.hpp"

namespace amsinc {

/// Ordered name → tensor registry. Insertion order is the canonical order
/// used for checkpoints and optimizer state.
class ParamSet {
 public:
  struct Entry {
    std::string name;
    Tensor value;
  };

  Tensor& add(std::string name, Tensor value);

  Tensor& operator[](std::string_view name);
  const Tensor& operator[](std::string_view name) const;
  const Tensor* find(std::string_view name) const;
  bool contains(std::string_view name) const { return find(name) != nullptr; }

  std::size_t size() const { return entries_.size(); }
  std::size_t num_scalars() const;
  auto begin() { return entries_.begin(); }
  auto end() { return entries_.end(); }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }
  std::vector<std::string> names() const;

  /// Same names, order and shapes, all zeros.
  ParamSet zeros_like() const;
  /// True when names, order and shapes agree.
  bool same_layout(const ParamSet& other) const;

  bool operator==(const ParamSet& other) const;

 private:
  std::vector<Entry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

}  // namespace amsinc
