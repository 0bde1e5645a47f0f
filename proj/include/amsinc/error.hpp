// Copyright 2026 The amsinc Authors
//
// Licensed under the Apache License, Version 2.0

#pragma once

#include <stdexcept>
#include <string>

namespace amsinc {

/// Root of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor extents that do not fit the operation.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Invalid hyperparameters, config files, or CLI ranges.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A NaN or Inf appeared where only finite values are allowed.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Missing or malformed input data (datasets, manifests, labels).
class DataError : public Error {
 public:
  using Error::Error;
};

}  // namespace amsinc
