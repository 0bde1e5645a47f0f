// Copyright 2026 The amsinc Authors
//
// Licensed under the Apache License, Version 2.0

#include "amsinc/sincbank.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <fmt/format.h>

#include "amsinc/error.hpp"
#include "amsinc/ndarr.hpp"
#include "amsinc/signal.hpp"

namespace amsinc::sinc {

namespace {

constexpr double kPi = std::numbers::pi;

// Tap at signed offset n. g(0) uses the analytic limit 2(f2 - f1).
double tap_value(double f1, double f2, double n, std::size_t filter_len, double gain) {
  const double g =
      n == 0.0 ? 2.0 * (f2 - f1) : (std::sin(2.0 * kPi * f2 * n) - std::sin(2.0 * kPi * f1 * n)) / (kPi * n);
  const double w = 0.54 + 0.46 * std::cos(2.0 * kPi * n / static_cast<double>(filter_len));
  return g * w * gain;
}

double band_gain(double f1, double f2) { return f2 > f1 ? 1.0 / (2.0 * (f2 - f1)) : 0.0; }

double sign_of(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

}  // namespace

void SincConstants::validate() const {
  if (filter_len < 1 || filter_len % 2 == 0) {
    throw ConfigError(fmt::format("sinc: filter length must be odd, got {}", filter_len));
  }
  if (sample_rate_hz <= 0) throw ConfigError("sinc: sample rate must be positive");
  if (!(min_low_hz >= 0.0) || !(min_band_hz >= 0.0)) {
    throw ConfigError("sinc: minimum cutoff and bandwidth must be >= 0");
  }
  if (!(min_low_hz + min_band_hz < 0.5 * sample_rate_hz)) {
    throw ConfigError("sinc: min_low_hz + min_band_hz must stay below Nyquist");
  }
}

void SincParams::validate() const {
  constants.validate();
  if (f1_raw.empty() || f1_raw.rank() != 1) throw ConfigError("sinc: need at least one filter");
  if (band_raw.shape() != f1_raw.shape()) {
    throw DimensionError(fmt::format("sinc: f1_raw {} and band_raw {} differ",
                                     shape_str(f1_raw.shape()), shape_str(band_raw.shape())));
  }
}

std::vector<double> mel_grid_hz(std::size_t num_filters, const SincConstants& c) {
  c.validate();
  if (num_filters < 1) throw ConfigError("sinc: need at least one filter");
  const double low = kMelGridLowHz;
  const double high = 0.5 * c.sample_rate_hz - (c.min_low_hz + c.min_band_hz);
  if (!(high > low)) {
    throw ConfigError(fmt::format("sinc: mel grid upper edge {} Hz is not above {} Hz", high, low));
  }
  const double m_low = signal::mel(low);
  const double m_high = signal::mel(high);
  std::vector<double> grid(num_filters + 1);
  for (std::size_t i = 0; i <= num_filters; ++i) {
    const double m = m_low + (m_high - m_low) * static_cast<double>(i) / static_cast<double>(num_filters);
    grid[i] = signal::mel_inv(m);
  }
  grid.front() = low;
  grid.back() = high;
  for (std::size_t i = 1; i < grid.size(); ++i) {
    if (!(grid[i] > grid[i - 1])) {
      throw ConfigError(fmt::format("sinc: {} filters collapse adjacent mel grid points", num_filters));
    }
  }
  return grid;
}

SincParams mel_init(std::size_t num_filters, const SincConstants& c) {
  const auto grid = mel_grid_hz(num_filters, c);
  const double fs = c.sample_rate_hz;
  SincParams p{Tensor({num_filters}), Tensor({num_filters}), c};
  for (std::size_t i = 0; i < num_filters; ++i) {
    p.f1_raw[i] = grid[i] / fs;
    p.band_raw[i] = (grid[i + 1] - grid[i]) / fs;
  }
  return p;
}

Cutoffs effective_cutoffs(const SincParams& p) {
  p.validate();
  const double fs = p.constants.sample_rate_hz;
  const double f1_max = 0.5 - p.constants.min_band_hz / fs;
  const std::size_t n = p.num_filters();
  Cutoffs c{std::vector<double>(n), std::vector<double>(n), std::vector<bool>(n),
            std::vector<bool>(n)};
  for (std::size_t i = 0; i < n; ++i) {
    const double f1 = (p.constants.min_low_hz + std::abs(p.f1_raw[i] * fs)) / fs;
    c.low_clamped[i] = f1 > f1_max;
    c.f1[i] = c.low_clamped[i] ? f1_max : f1;
    const double f2 = c.f1[i] + (p.constants.min_band_hz + std::abs(p.band_raw[i] * fs)) / fs;
    c.high_clamped[i] = f2 > 0.5;
    c.f2[i] = c.high_clamped[i] ? 0.5 : f2;
  }
  return c;
}

double hamming(std::ptrdiff_t n, std::size_t filter_len) {
  return 0.54 + 0.46 * std::cos(2.0 * kPi * static_cast<double>(n) / static_cast<double>(filter_len));
}

std::vector<double> build_taps(double f1, double f2, std::size_t filter_len) {
  const std::size_t half = (filter_len - 1) / 2;
  const double gain = band_gain(f1, f2);
  std::vector<double> taps(filter_len, 0.0);
  if (gain == 0.0) return taps;
  for (std::size_t n = 0; n <= half; ++n) {
    const double v = tap_value(f1, f2, static_cast<double>(n), filter_len, gain);
    taps[half + n] = v;
    taps[half - n] = v;
  }
  return taps;
}

std::vector<double> build_taps_direct(double f1, double f2, std::size_t filter_len) {
  const auto half = static_cast<std::ptrdiff_t>((filter_len - 1) / 2);
  const double gain = band_gain(f1, f2);
  std::vector<double> taps(filter_len, 0.0);
  if (gain == 0.0) return taps;
  for (std::size_t j = 0; j < filter_len; ++j) {
    const auto n = static_cast<std::ptrdiff_t>(j) - half;
    taps[j] = tap_value(f1, f2, static_cast<double>(n), filter_len, gain);
  }
  return taps;
}

FilterBank build_filters(const SincParams& p) {
  const std::size_t nf = p.num_filters();
  const std::size_t len = p.constants.filter_len;
  const std::size_t half = p.constants.half_len();
  FilterBank bank;
  bank.cutoffs = effective_cutoffs(p);
  bank.taps = Tensor({nf, 1, len});
  bank.cos_f1.resize(nf * (half + 1));
  bank.cos_f2.resize(nf * (half + 1));
  for (std::size_t f = 0; f < nf; ++f) {
    const double f1 = bank.cutoffs.f1[f];
    const double f2 = bank.cutoffs.f2[f];
    const auto taps = build_taps(f1, f2, len);
    std::copy(taps.begin(), taps.end(), bank.taps.data() + f * len);
    for (std::size_t n = 0; n <= half; ++n) {
      const auto nd = static_cast<double>(n);
      bank.cos_f1[f * (half + 1) + n] = std::cos(2.0 * kPi * f1 * nd);
      bank.cos_f2[f * (half + 1) + n] = std::cos(2.0 * kPi * f2 * nd);
    }
  }
  return bank;
}

SincForward sinc_forward(const Tensor& x, const SincParams& p) {
  if (x.rank() != 3 || x.dim(1) != 1) {
    throw DimensionError("sinc_forward: expected input [B,1,T], got " + shape_str(x.shape()));
  }
  SincForward out;
  out.cache.bank = build_filters(p);
  out.y = ndarr::conv1d_forward(x, out.cache.bank.taps, 1);
  out.cache.input = x;
  return out;
}

void taps_to_raw_grads(const Tensor& grad_taps, const FilterBank& bank, const SincParams& p,
                       Tensor& grad_f1_raw, Tensor& grad_band_raw) {
  const std::size_t nf = p.num_filters();
  const std::size_t len = p.constants.filter_len;
  const std::size_t half = p.constants.half_len();
  if (grad_taps.shape() != Shape{nf, 1, len} || bank.taps.shape() != grad_taps.shape()) {
    throw DimensionError(fmt::format("sinc_backward: tap gradient {} does not match bank {}",
                                     shape_str(grad_taps.shape()), shape_str(bank.taps.shape())));
  }
  grad_f1_raw = Tensor({nf});
  grad_band_raw = Tensor({nf});
  for (std::size_t f = 0; f < nf; ++f) {
    const double f1 = bank.cutoffs.f1[f];
    const double f2 = bank.cutoffs.f2[f];
    if (!(f2 > f1)) continue;
    const double denom = 2.0 * (f2 - f1);
    const double* g = grad_taps.data() + f * len;
    const double* t = bank.taps.data() + f * len;
    double d_f1 = 0.0;
    double d_f2 = 0.0;
    for (std::size_t n = 0; n <= half; ++n) {
      // Mirrored taps share one value, so their gradients add.
      const double dt = n == 0 ? g[half] : g[half + n] + g[half - n];
      const double w = hamming(static_cast<std::ptrdiff_t>(n), len);
      const double dg2 = n == 0 ? 2.0 : 2.0 * bank.cos_f2[f * (half + 1) + n];
      const double dg1 = n == 0 ? -2.0 : -2.0 * bank.cos_f1[f * (half + 1) + n];
      const double tn = t[half + n];
      d_f2 += dt * (w * dg2 / denom - tn * 2.0 / denom);
      d_f1 += dt * (w * dg1 / denom + tn * 2.0 / denom);
    }
    const bool low_free = !bank.cutoffs.low_clamped[f];
    const bool high_free = !bank.cutoffs.high_clamped[f];
    const double through_f1 = d_f1 + (high_free ? d_f2 : 0.0);
    grad_f1_raw[f] = low_free ? sign_of(p.f1_raw[f]) * through_f1 : 0.0;
    grad_band_raw[f] = high_free ? sign_of(p.band_raw[f]) * d_f2 : 0.0;
  }
}

SincGrads sinc_backward(const Tensor& grad_y, const SincCache& cache, const SincParams& p) {
  if (cache.bank.taps.empty() || cache.bank.taps.dim(0) != p.num_filters() ||
      cache.bank.taps.dim(2) != p.constants.filter_len) {
    throw DimensionError("sinc_backward: cache was built for a different filter bank");
  }
  auto conv = ndarr::conv1d_backward(grad_y, cache.input, cache.bank.taps, 1);
  SincGrads out;
  out.grad_x = std::move(conv.grad_x);
  taps_to_raw_grads(conv.grad_k, cache.bank, p, out.grad_f1_raw, out.grad_band_raw);
  return out;
}

}  // namespace amsinc::sinc
