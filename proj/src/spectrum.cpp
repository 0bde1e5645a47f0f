// Copyright 2026 The amsinc Authors
//
// Licensed under the Apache License, Version 2.0

#include "amsinc/spectrum.hpp"

#include <cmath>
#include <fstream>
#include <mutex>

#include <fftw3.h>
#include <fmt/format.h>

#include "amsinc/error.hpp"

namespace amsinc::spectrum {

namespace {

std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

}  // namespace

std::vector<double> magnitude(std::span<const double> x, std::size_t nfft) {
  if (nfft < 2 || x.size() > nfft) {
    throw DimensionError(fmt::format("magnitude: {} samples do not fit an FFT of size {}", x.size(), nfft));
  }
  const std::size_t bins = nfft / 2 + 1;
  long double* in = fftwl_alloc_real(nfft);
  fftwl_complex* out = fftwl_alloc_complex(bins);
  fftwl_plan plan;
  {
    std::lock_guard lock(planner_mutex());
    plan = fftwl_plan_dft_r2c_1d(static_cast<int>(nfft), in, out, FFTW_ESTIMATE);
  }
  std::fill(in, in + nfft, 0.0L);
  std::copy(x.begin(), x.end(), in);
  fftwl_execute(plan);
  std::vector<double> mag(bins);
  for (std::size_t k = 0; k < bins; ++k) mag[k] = static_cast<double>(std::hypot(out[k][0], out[k][1]));
  {
    std::lock_guard lock(planner_mutex());
    fftwl_destroy_plan(plan);
  }
  fftwl_free(in);
  fftwl_free(out);
  return mag;
}

double to_db(double magnitude) { return 20.0 * std::log10(std::max(magnitude, kMagnitudeFloor)); }

std::vector<double> magnitude_db(std::span<const double> x, std::size_t nfft) {
  auto m = magnitude(x, nfft);
  for (double& v : m) v = to_db(v);
  return m;
}

ExportPaths export_filters(const sinc::SincParams& p, const std::filesystem::path& dir, std::size_t nfft) {
  const auto bank = sinc::build_filters(p);
  const std::size_t filters = p.num_filters(), len = p.constants.filter_len;
  const double fs = p.constants.sample_rate_hz;
  std::filesystem::create_directories(dir);
  ExportPaths paths{dir / "filter_taps.csv", dir / "filter_response.csv"};
  std::ofstream taps(paths.taps, std::ios::trunc), resp(paths.response, std::ios::trunc);
  if (!taps || !resp) throw DataError("cannot write filter CSVs in " + dir.string());
  taps << "filter_id,f1_hz,f2_hz,tap_index,tap_value\n";
  resp << "filter_id,freq_hz,magnitude_db\n";
  for (std::size_t f = 0; f < filters; ++f) {
    const std::span<const double> h(bank.taps.data() + f * len, len);
    const double f1 = bank.cutoffs.f1[f] * fs, f2 = bank.cutoffs.f2[f] * fs;
    for (std::size_t n = 0; n < len; ++n) taps << fmt::format("{},{:.17g},{:.17g},{},{:.17g}\n", f, f1, f2, n, h[n]);
    const auto db = magnitude_db(h, nfft);
    for (std::size_t k = 0; k < db.size(); ++k) {
      resp << fmt::format("{},{:.17g},{:.17g}\n", f, fs * static_cast<double>(k) / static_cast<double>(nfft), db[k]);
    }
  }
  if (!taps || !resp) throw DataError("short write of filter CSVs in " + dir.string());
  return paths;
}

}  // namespace amsinc::spectrum
