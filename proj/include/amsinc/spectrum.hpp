// Copyright 2026 The amsinc Authors
//
// Licensed under the Apache License, Version 2.0

#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

#include "amsinc/sincbank.hpp"

namespace amsinc::spectrum {

inline constexpr std::size_t kExportFftSize = 4096;
/// Magnitudes below this are reported at the floor (−300 dB).
inline constexpr double kMagnitudeFloor = 1e-15;

/// |X[k]| for k = 0..nfft/2 of the zero-padded real signal.
std::vector<double> magnitude(std::span<const double> x, std::size_t nfft);

double to_db(double magnitude);
std::vector<double> magnitude_db(std::span<const double> x, std::size_t nfft);

struct ExportPaths {
  std::filesystem::path taps;      // filter_id,f1_hz,f2_hz,tap_index,tap_value
  std::filesystem::path response;  // filter_id,freq_hz,magnitude_db
};

/// Writes filter_taps.csv and filter_response.csv into dir.
ExportPaths export_filters(const sinc::SincParams& p, const std::filesystem::path& dir,
                           std::size_t nfft = kExportFftSize);

}  // namespace amsinc::spectrum
