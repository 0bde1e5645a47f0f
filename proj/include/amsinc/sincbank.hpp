// Copyright 2026 The amsinc Authors
//
// Licensed under the Apache License, Version 2.0

#pragma once

#include <cstddef>
#include <vector>

#include "amsinc/tensor.hpp"

namespace amsinc::sinc {

struct SincConstants {
  double min_low_hz = 50.0;
  double min_band_hz = 50.0;
  std::size_t filter_len = 251;  // odd
  int sample_rate_hz = 16000;

  void validate() const;
  std::size_t half_len() const { return (filter_len - 1) / 2; }
};

/// The layer's only learnables: a raw low cutoff and a raw bandwidth per
/// filter, both in units of normalized frequency (Hz / fs).
struct SincParams {
  Tensor f1_raw;    // [F]
  Tensor band_raw;  // [F]
  SincConstants constants;

  std::size_t num_filters() const { return f1_raw.size(); }
  void validate() const;
};

/// Lower edge of the mel grid used by mel_init.
inline constexpr double kMelGridLowHz = 30.0;

/// F+1 points equally spaced in mel between 30 Hz and
/// fs/2 - (min_low_hz + min_band_hz).
std::vector<double> mel_grid_hz(std::size_t num_filters, const SincConstants& c);

/// Stores the mel grid in the raw parameters: filter i gets
/// f1_raw = p_i / fs and band_raw = (p_{i+1} - p_i) / fs, so its effective
/// cutoffs are the grid pair shifted up by the minimum constants and the top
/// filter's f2 lands on Nyquist.
SincParams mel_init(std::size_t num_filters, const SincConstants& c);

struct Cutoffs {
  std::vector<double> f1;  // normalized
  std::vector<double> f2;  // normalized
  std::vector<bool> low_clamped;
  std::vector<bool> high_clamped;
};

/// f1 = min((min_low + |f1_raw·fs|)/fs, 0.5 - min_band/fs)
/// f2 = min(f1 + (min_band + |band_raw·fs|)/fs, 0.5)
Cutoffs effective_cutoffs(const SincParams& p);

/// Windowed, gain-normalized band-pass taps for one filter (length L, odd),
/// built for offsets 0..(L-1)/2 and mirrored. A zero-width band gives an
/// all-zero filter.
std::vector<double> build_taps(double f1, double f2, std::size_t filter_len);
/// Evaluates every tap directly from its signed offset, with no mirroring.
std::vector<double> build_taps_direct(double f1, double f2, std::size_t filter_len);

/// Hamming window value at signed offset n from the filter center.
double hamming(std::ptrdiff_t n, std::size_t filter_len);

struct FilterBank {
  Tensor taps;  // [F, 1, L]
  Cutoffs cutoffs;
  /// cos(2π f n) for n = 0..(L-1)/2, per filter; reused by the backward pass.
  std::vector<double> cos_f1;
  std::vector<double> cos_f2;
};

FilterBank build_filters(const SincParams& p);

struct SincCache {
  Tensor input;  // [B, 1, T]
  FilterBank bank;
};

struct SincForward {
  Tensor y;  // [B, F, T-L+1]
  SincCache cache;
};

SincForward sinc_forward(const Tensor& x, const SincParams& p);

struct SincGrads {
  Tensor grad_x;
  Tensor grad_f1_raw;
  Tensor grad_band_raw;
};

SincGrads sinc_backward(const Tensor& grad_y, const SincCache& cache, const SincParams& p);

/// Gradient of a loss w.r.t. the raw parameters given its gradient w.r.t.
/// the taps; the chain through window, gain normalization, clamps and |·|.
void taps_to_raw_grads(const Tensor& grad_taps, const FilterBank& bank, const SincParams& p,
                       Tensor& grad_f1_raw, Tensor& grad_band_raw);

}  // namespace amsinc::sinc
