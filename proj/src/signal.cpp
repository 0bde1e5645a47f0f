// Copyright 2026 The amsinc Authors
//
// Licensed under the Apache License, Version 2.0

#include "amsinc/signal.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>

#include <fmt/format.h>

namespace amsinc::signal {

namespace {

std::uint32_t read_u32(std::span<const std::uint8_t> b, std::size_t at) {
  return static_cast<std::uint32_t>(b[at]) | (static_cast<std::uint32_t>(b[at + 1]) << 8) |
         (static_cast<std::uint32_t>(b[at + 2]) << 16) |
         (static_cast<std::uint32_t>(b[at + 3]) << 24);
}

std::uint16_t read_u16(std::span<const std::uint8_t> b, std::size_t at) {
  return static_cast<std::uint16_t>(b[at] | (b[at + 1] << 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

bool tag_is(std::span<const std::uint8_t> b, std::size_t at, const char* tag) {
  return std::equal(tag, tag + 4, b.begin() + static_cast<std::ptrdiff_t>(at));
}

}  // namespace

Waveform decode_wav(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 12 || !tag_is(bytes, 0, "RIFF") || !tag_is(bytes, 8, "WAVE")) {
    throw WavError(WavErrorKind::kNotRiffWave, "wav: missing RIFF/WAVE header");
  }
  bool have_fmt = false;
  int sample_rate = 0;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const std::uint32_t len = read_u32(bytes, pos + 4);
    const std::size_t body = pos + 8;
    if (len > bytes.size() - body) {
      throw WavError(WavErrorKind::kTruncated,
                     fmt::format("wav: chunk at byte {} declares {} bytes, only {} remain", pos,
                                 len, bytes.size() - body));
    }
    if (tag_is(bytes, pos, "fmt ")) {
      if (len < 16) throw WavError(WavErrorKind::kTruncated, "wav: fmt chunk shorter than 16 bytes");
      const std::uint16_t format = read_u16(bytes, body);
      const std::uint16_t channels = read_u16(bytes, body + 2);
      const std::uint16_t bits = read_u16(bytes, body + 14);
      if (format != 1) {
        throw WavError(WavErrorKind::kNotPcm, fmt::format("wav: format code {} is not PCM", format));
      }
      if (channels != 1) {
        throw WavError(WavErrorKind::kChannelCount,
                       fmt::format("wav: {} channels, only mono is supported", channels));
      }
      if (bits != 16) {
        throw WavError(WavErrorKind::kBitDepth,
                       fmt::format("wav: {}-bit samples, only 16-bit is supported", bits));
      }
      sample_rate = static_cast<int>(read_u32(bytes, body + 4));
      if (sample_rate <= 0) throw WavError(WavErrorKind::kNotPcm, "wav: sample rate is zero");
      have_fmt = true;
    } else if (tag_is(bytes, pos, "data")) {
      if (!have_fmt) throw WavError(WavErrorKind::kMissingChunk, "wav: data chunk before fmt chunk");
      if (len % 2 != 0) throw WavError(WavErrorKind::kTruncated, "wav: odd-length 16-bit data chunk");
      Waveform w;
      w.sample_rate_hz = sample_rate;
      w.samples.resize(len / 2);
      for (std::size_t i = 0; i < w.samples.size(); ++i) {
        const auto raw = static_cast<std::int16_t>(read_u16(bytes, body + 2 * i));
        w.samples[i] = static_cast<double>(raw) / 32768.0;
      }
      return w;
    }
    pos = body + len + (len & 1U);
  }
  if (pos < bytes.size()) throw WavError(WavErrorKind::kTruncated, "wav: truncated chunk header");
  throw WavError(WavErrorKind::kMissingChunk,
                 have_fmt ? "wav: no data chunk" : "wav: no fmt chunk");
}

Waveform read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw WavError(WavErrorKind::kIo, "wav: cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  try {
    return decode_wav(bytes);
  } catch (const WavError& e) {
    throw WavError(e.kind(), path.string() + ": " + e.what());
  }
}

std::vector<std::uint8_t> encode_wav(const Waveform& w) {
  if (w.sample_rate_hz <= 0) throw ConfigError("wav: sample rate must be positive");
  const auto data_bytes = static_cast<std::uint32_t>(w.samples.size() * 2);
  std::vector<std::uint8_t> out;
  out.reserve(44 + data_bytes);
  out.insert(out.end(), {'R', 'I', 'F', 'F'});
  put_u32(out, 36 + data_bytes);
  out.insert(out.end(), {'W', 'A', 'V', 'E', 'f', 'm', 't', ' '});
  put_u32(out, 16);
  put_u16(out, 1);
  put_u16(out, 1);
  put_u32(out, static_cast<std::uint32_t>(w.sample_rate_hz));
  put_u32(out, static_cast<std::uint32_t>(w.sample_rate_hz) * 2);
  put_u16(out, 2);
  put_u16(out, 16);
  out.insert(out.end(), {'d', 'a', 't', 'a'});
  put_u32(out, data_bytes);
  for (double s : w.samples) {
    const double q = std::clamp(std::round(s * 32768.0), -32768.0, 32767.0);
    put_u16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(q)));
  }
  return out;
}

void write_wav(const std::filesystem::path& path, const Waveform& w) {
  const auto bytes = encode_wav(w);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw WavError(WavErrorKind::kIo, "wav: cannot create " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw WavError(WavErrorKind::kIo, "wav: write failed for " + path.string());
}

void ChunkConfig::validate() const {
  if (!(overlap_ms >= 0.0) || !(window_ms > overlap_ms)) {
    throw ConfigError(fmt::format("chunk: need window_ms > overlap_ms >= 0, got window {} overlap {}",
                                  window_ms, overlap_ms));
  }
}

std::size_t frame_length(const ChunkConfig& cfg, int sample_rate_hz) {
  cfg.validate();
  const double len = std::round(cfg.window_ms * sample_rate_hz / 1000.0);
  if (len < 2.0) throw ConfigError("chunk: window shorter than two samples");
  return static_cast<std::size_t>(len);
}

std::size_t frame_start(const ChunkConfig& cfg, int sample_rate_hz, std::size_t i) {
  return static_cast<std::size_t>(
      std::round(static_cast<double>(i) * cfg.hop_ms() * sample_rate_hz / 1000.0));
}

std::size_t chunk_count(std::size_t num_samples, int sample_rate_hz, const ChunkConfig& cfg) {
  const std::size_t len = frame_length(cfg, sample_rate_hz);
  std::size_t count = 0;
  while (frame_start(cfg, sample_rate_hz, count) + len <= num_samples) ++count;
  return count;
}

std::vector<std::vector<double>> chunk(const Waveform& w, const ChunkConfig& cfg) {
  const std::size_t len = frame_length(cfg, w.sample_rate_hz);
  const std::size_t n = chunk_count(w.samples.size(), w.sample_rate_hz, cfg);
  std::vector<std::vector<double>> frames;
  frames.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto first = w.samples.begin() +
                       static_cast<std::ptrdiff_t>(frame_start(cfg, w.sample_rate_hz, i));
    frames.emplace_back(first, first + static_cast<std::ptrdiff_t>(len));
  }
  return frames;
}

double frame_stddev(std::span<const double> frame) {
  const auto n = static_cast<double>(frame.size());
  double mean = 0.0;
  for (double v : frame) mean += v;
  mean /= n;
  double var = 0.0;
  for (double v : frame) var += (v - mean) * (v - mean);
  return std::sqrt(var / n);
}

std::vector<double> standardize_chunk(std::span<const double> frame) {
  if (frame.size() < 2) throw DimensionError("standardize_chunk: frame needs at least 2 samples");
  const auto n = static_cast<double>(frame.size());
  double mean = 0.0;
  for (double v : frame) mean += v;
  mean /= n;
  const double sigma = std::max(frame_stddev(frame), kStdGuard);
  std::vector<double> out(frame.size());
  for (std::size_t i = 0; i < frame.size(); ++i) out[i] = (frame[i] - mean) / sigma;
  return out;
}

double mel(double f_hz) {
  if (!(f_hz >= 0.0)) throw ConfigError(fmt::format("mel: frequency must be >= 0, got {}", f_hz));
  return 2595.0 * std::log10(1.0 + f_hz / 700.0);
}

double mel_inv(double m) {
  if (!(m >= 0.0)) throw ConfigError(fmt::format("mel_inv: mel value must be >= 0, got {}", m));
  return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0);
}

void validate_dataset(const FrameDataset& ds) {
  if (ds.num_speakers <= 0) throw DataError("dataset: num_speakers must be positive");
  if (ds.frame_len < 2) throw DataError("dataset: frame_len must be at least 2");
  if (ds.utterance_id.size() != ds.labels.size()) {
    throw DataError("dataset: utterance ids and labels differ in length");
  }
  if (ds.labels.empty()) return;
  if (ds.frames.shape() != Shape{ds.labels.size(), ds.frame_len}) {
    throw DataError(fmt::format("dataset: frames are {}, expected [{},{}]",
                                shape_str(ds.frames.shape()), ds.labels.size(), ds.frame_len));
  }
  for (std::size_t i = 0; i < ds.labels.size(); ++i) {
    if (ds.labels[i] < 0 || ds.labels[i] >= ds.num_speakers) {
      throw DataError(fmt::format("dataset: frame {} has label {} outside [0,{})", i, ds.labels[i],
                                  ds.num_speakers));
    }
  }
}

FrameDatasetBuilder::FrameDatasetBuilder(ChunkConfig cfg, int sample_rate_hz)
    : cfg_(cfg), sample_rate_hz_(sample_rate_hz), frame_len_(frame_length(cfg, sample_rate_hz)) {}

std::size_t FrameDatasetBuilder::add_utterance(const Waveform& w, int speaker, int utterance_id) {
  if (w.sample_rate_hz != sample_rate_hz_) {
    throw DataError(fmt::format("dataset: utterance {} has sample rate {}, expected {}",
                                utterance_id, w.sample_rate_hz, sample_rate_hz_));
  }
  std::size_t kept = 0;
  for (const auto& frame : chunk(w, cfg_)) {
    if (frame_stddev(frame) < kStdGuard) {
      ++dropped_;
      continue;
    }
    const auto z = standardize_chunk(frame);
    values_.insert(values_.end(), z.begin(), z.end());
    labels_.push_back(speaker);
    utterances_.push_back(utterance_id);
    ++kept;
  }
  return kept;
}

FrameDataset FrameDatasetBuilder::build(int num_speakers) && {
  FrameDataset ds;
  ds.num_speakers = num_speakers;
  ds.frame_len = frame_len_;
  if (!labels_.empty()) ds.frames = Tensor({labels_.size(), frame_len_}, std::move(values_));
  ds.labels = std::move(labels_);
  ds.utterance_id = std::move(utterances_);
  validate_dataset(ds);
  return ds;
}

}  // namespace amsinc::signal
