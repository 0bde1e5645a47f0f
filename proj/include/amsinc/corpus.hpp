// Copyright 2026 The amsinc Authors
//
// Licensed under the Apache License, Version 2.0

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "amsinc/signal.hpp"

namespace amsinc::signal {

/// Per-speaker source-filter parameters: a harmonic source whose F0 wanders
/// inside [f0_min_hz, f0_max_hz], shaped by three resonances.
struct VoiceModel {
  double f0_min_hz = 100.0;
  double f0_max_hz = 140.0;
  std::array<double, 3> formant_hz{500.0, 1500.0, 2500.0};
  std::array<double, 3> formant_bw_hz{90.0, 110.0, 150.0};
  double noise_floor = 0.01;
};

struct CorpusSpec {
  int num_speakers = 8;
  int utterances_per_speaker = 8;
  double utterance_sec = 2.0;
  int sample_rate_hz = 16000;
  std::uint64_t seed = 1;
  /// Per-speaker train:test utterance ratio.
  int split_train = 5;
  int split_test = 3;
  /// Explicit voices, one per speaker; empty means drawn from `seed`.
  std::vector<VoiceModel> voices;
  ChunkConfig chunking;

  void validate() const;
  int train_utterances() const;
};

/// Voices for every speaker: `spec.voices` if given, otherwise a stratified
/// deterministic draw that spreads F0 and formants across speakers.
std::vector<VoiceModel> resolve_voices(const CorpusSpec& spec);

/// One utterance, quantized to the 16-bit grid so it survives a WAV round trip.
signal::Waveform synth_utterance(const CorpusSpec& spec, const VoiceModel& voice, int speaker,
                                 int utterance);

struct SynthUtterance {
  int speaker = 0;
  int index = 0;      // within the speaker
  int global_id = 0;  // speaker * utterances_per_speaker + index
  bool train = false;
  Waveform wave;
};

std::vector<SynthUtterance> synth_utterances(const CorpusSpec& spec);

struct CorpusSplit {
  FrameDataset train;
  FrameDataset test;
};

/// Generates, splits, chunks and standardizes the synthetic corpus.
CorpusSplit synth_corpus(const CorpusSpec& spec);

struct ManifestRow {
  std::string path;  // relative to the manifest's directory
  int speaker_id = 0;
  std::string split;  // "train" or "test"
};

void write_manifest(const std::filesystem::path& path, const std::vector<ManifestRow>& rows);
std::vector<ManifestRow> read_manifest(const std::filesystem::path& path);

/// Writes one WAV per utterance plus manifest.csv into `dir`.
std::vector<ManifestRow> write_corpus(const CorpusSpec& spec, const std::filesystem::path& dir);

/// Loads `dir/manifest.csv` and its WAVs into train/test datasets. The
/// speaker count is max(speaker_id) + 1 across both splits.
CorpusSplit load_dataset_dir(const std::filesystem::path& dir, const ChunkConfig& chunking);

}  // namespace amsinc::signal
