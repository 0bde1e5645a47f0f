// Copyright 2026 The amsinc Authors
//
// Licensed under the Apache License, Version 2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "amsinc/error.hpp"
#include "amsinc/tensor.hpp"

namespace amsinc::signal {

/// Mono audio with samples in [-1, 1].
struct Waveform {
  std::vector<double> samples;
  int sample_rate_hz = 16000;

  double duration_ms() const {
    return 1000.0 * static_cast<double>(samples.size()) / sample_rate_hz;
  }
};

enum class WavErrorKind {
  kIo,
  kNotRiffWave,
  kNotPcm,
  kChannelCount,
  kBitDepth,
  kTruncated,
  kMissingChunk,
};

class WavError : public DataError {
 public:
  WavError(WavErrorKind kind, const std::string& what) : DataError(what), kind_(kind) {}
  WavErrorKind kind() const noexcept { return kind_; }

 private:
  WavErrorKind kind_;
};

/// Decodes RIFF/WAVE, PCM format code 1, 16-bit little-endian, mono.
Waveform decode_wav(std::span<const std::uint8_t> bytes);
Waveform read_wav(const std::filesystem::path& path);

/// Samples are quantized as round(x·32768) clamped to the int16 range, so any
/// waveform that came out of decode_wav round-trips exactly.
std::vector<std::uint8_t> encode_wav(const Waveform& w);
void write_wav(const std::filesystem::path& path, const Waveform& w);

/// Framing parameters. Consecutive frames share `overlap_ms`, so the hop is
/// window_ms - overlap_ms.
struct ChunkConfig {
  double window_ms = 200.0;
  double overlap_ms = 10.0;

  double hop_ms() const { return window_ms - overlap_ms; }
  void validate() const;
};

std::size_t frame_length(const ChunkConfig& cfg, int sample_rate_hz);
/// Start sample of frame i: round(i·hop·fs/1000).
std::size_t frame_start(const ChunkConfig& cfg, int sample_rate_hz, std::size_t i);
/// Number of frames lying fully inside a signal of `num_samples` samples.
std::size_t chunk_count(std::size_t num_samples, int sample_rate_hz, const ChunkConfig& cfg);

std::vector<std::vector<double>> chunk(const Waveform& w, const ChunkConfig& cfg = {});

/// Guard applied to the population standard deviation.
inline constexpr double kStdGuard = 1e-8;

/// Population standard deviation of a frame, without the guard.
double frame_stddev(std::span<const double> frame);
/// Zero mean, unit population standard deviation, with σ ← max(σ, 1e-8).
std::vector<double> standardize_chunk(std::span<const double> frame);

/// 2595·log10(1 + f/700).
double mel(double f_hz);
double mel_inv(double m);

/// Standardized fixed-length chunks with speaker labels.
struct FrameDataset {
  Tensor frames;  // [N, frame_len]
  std::vector<int> labels;
  std::vector<int> utterance_id;
  int num_speakers = 0;
  std::size_t frame_len = 0;

  std::size_t size() const { return labels.size(); }
  std::span<const double> frame(std::size_t i) const {
    return frames.values().subspan(i * frame_len, frame_len);
  }
};

/// Throws DataError if any FrameDataset invariant is violated.
void validate_dataset(const FrameDataset& ds);

/// Accumulates utterances into a FrameDataset: chunks, drops silent frames
/// (σ below the guard), standardizes the rest.
class FrameDatasetBuilder {
 public:
  FrameDatasetBuilder(ChunkConfig cfg, int sample_rate_hz);

  /// Returns the number of frames kept from this utterance.
  std::size_t add_utterance(const Waveform& w, int speaker, int utterance_id);
  std::size_t dropped_silent() const { return dropped_; }

  FrameDataset build(int num_speakers) &&;

 private:
  ChunkConfig cfg_;
  int sample_rate_hz_;
  std::size_t frame_len_;
  std::vector<double> values_;
  std::vector<int> labels_;
  std::vector<int> utterances_;
  std::size_t dropped_ = 0;
};

}  // namespace amsinc::signal
