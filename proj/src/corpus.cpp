// Copyright 2026 The amsinc Authors
//
// Licensed under the Apache License, Version 2.0

#include "amsinc/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include <fmt/format.h>

namespace amsinc::signal {

namespace {

constexpr std::uint32_t kVoiceSalt = 0x766f6963;
constexpr std::uint32_t kUtteranceSalt = 0x75747472;

std::mt19937_64 stream_rng(std::uint64_t seed, std::uint32_t salt, int a, int b) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), salt,
                    static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(b)};
  return std::mt19937_64(seq);
}

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

std::vector<int> permutation(std::mt19937_64& rng, int n) {
  std::vector<int> p(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) p[static_cast<std::size_t>(i)] = i;
  // Fisher-Yates with explicit draws; std::shuffle's algorithm is unspecified.
  for (int i = n - 1; i > 0; --i) {
    const auto j = static_cast<int>(rng() % static_cast<std::uint64_t>(i + 1));
    std::swap(p[static_cast<std::size_t>(i)], p[static_cast<std::size_t>(j)]);
  }
  return p;
}

// Sum of three Lorentzian resonances plus a small floor.
double envelope(const VoiceModel& v, const std::array<double, 3>& formants, double f) {
  double a = 0.01;
  for (std::size_t i = 0; i < 3; ++i) {
    const double d = (f - formants[i]) / (0.5 * v.formant_bw_hz[i]);
    a += 1.0 / (1.0 + d * d);
  }
  return a;
}

}  // namespace

void CorpusSpec::validate() const {
  if (num_speakers < 2) throw ConfigError("corpus: num_speakers must be >= 2");
  if (utterances_per_speaker < 2) throw ConfigError("corpus: utterances_per_speaker must be >= 2");
  if (sample_rate_hz <= 0) throw ConfigError("corpus: sample_rate_hz must be positive");
  if (split_train <= 0 || split_test <= 0) throw ConfigError("corpus: split ratio terms must be positive");
  chunking.validate();
  const double samples = utterance_sec * sample_rate_hz;
  if (!(samples >= static_cast<double>(frame_length(chunking, sample_rate_hz)))) {
    throw ConfigError(fmt::format("corpus: utterance of {} s is shorter than the {} ms frame window",
                                  utterance_sec, chunking.window_ms));
  }
  const int train = train_utterances();
  if (train < 1 || train >= utterances_per_speaker) {
    throw ConfigError(fmt::format("corpus: split {}:{} of {} utterances leaves an empty split",
                                  split_train, split_test, utterances_per_speaker));
  }
  if (!voices.empty() && static_cast<int>(voices.size()) != num_speakers) {
    throw ConfigError(fmt::format("corpus: {} voices given for {} speakers", voices.size(), num_speakers));
  }
  const double nyquist = 0.5 * sample_rate_hz;
  for (std::size_t s = 0; s < voices.size(); ++s) {
    const auto& v = voices[s];
    if (!(v.f0_min_hz > 0.0) || !(v.f0_max_hz >= v.f0_min_hz) || !(v.f0_max_hz < nyquist)) {
      throw ConfigError(fmt::format("corpus: speaker {} has invalid F0 range [{}, {}]", s, v.f0_min_hz,
                                    v.f0_max_hz));
    }
    for (std::size_t i = 0; i < 3; ++i) {
      if (!(v.formant_hz[i] > 0.0) || !(v.formant_hz[i] < nyquist)) {
        throw ConfigError(fmt::format("corpus: speaker {} formant {} Hz not below Nyquist {} Hz", s,
                                      v.formant_hz[i], nyquist));
      }
      if (!(v.formant_bw_hz[i] > 0.0)) {
        throw ConfigError(fmt::format("corpus: speaker {} formant bandwidth must be positive", s));
      }
    }
    if (!(v.noise_floor >= 0.0)) throw ConfigError("corpus: noise_floor must be >= 0");
  }
}

int CorpusSpec::train_utterances() const {
  return static_cast<int>(std::lround(static_cast<double>(utterances_per_speaker) * split_train /
                                      (split_train + split_test)));
}

std::vector<VoiceModel> resolve_voices(const CorpusSpec& spec) {
  if (!spec.voices.empty()) return spec.voices;
  const int n = spec.num_speakers;
  auto rng = stream_rng(spec.seed, kVoiceSalt, 0, 0);
  const auto p0 = permutation(rng, n);
  const auto p1 = permutation(rng, n);
  const auto p2 = permutation(rng, n);
  const auto p3 = permutation(rng, n);
  const double nyquist = 0.5 * spec.sample_rate_hz;
  std::vector<VoiceModel> voices(static_cast<std::size_t>(n));
  for (int s = 0; s < n; ++s) {
    const auto i = static_cast<std::size_t>(s);
    auto& v = voices[i];
    const double center = 90.0 + 140.0 * (p0[i] + 0.5) / n;
    v.f0_min_hz = 0.88 * center;
    v.f0_max_hz = 1.12 * center;
    v.formant_hz[0] = 300.0 + 600.0 * (p1[i] + uniform(rng, 0.2, 0.8)) / n;
    v.formant_hz[1] = 1000.0 + 1200.0 * (p2[i] + uniform(rng, 0.2, 0.8)) / n;
    v.formant_hz[2] = 2300.0 + 1100.0 * (p3[i] + uniform(rng, 0.2, 0.8)) / n;
    v.formant_bw_hz = {90.0 * uniform(rng, 0.9, 1.1), 110.0 * uniform(rng, 0.9, 1.1),
                       150.0 * uniform(rng, 0.9, 1.1)};
    for (double& f : v.formant_hz) f = std::min(f, 0.45 * nyquist);
    v.noise_floor = 0.01;
  }
  return voices;
}

Waveform synth_utterance(const CorpusSpec& spec, const VoiceModel& voice, int speaker,
                         int utterance) {
  auto rng = stream_rng(spec.seed, kUtteranceSalt, speaker, utterance);
  const double fs = spec.sample_rate_hz;
  const auto n = static_cast<std::size_t>(std::lround(spec.utterance_sec * fs));
  const double dur = static_cast<double>(n) / fs;

  const double f0_start = uniform(rng, voice.f0_min_hz, voice.f0_max_hz);
  const double f0_end = uniform(rng, voice.f0_min_hz, voice.f0_max_hz);
  const double vib_rate = uniform(rng, 4.0, 6.0);
  const double vib_phase = uniform(rng, 0.0, 2.0 * std::numbers::pi);
  const double am_rate = uniform(rng, 2.0, 4.0);
  const double am_phase = uniform(rng, 0.0, 2.0 * std::numbers::pi);
  std::array<double, 3> formants = voice.formant_hz;
  for (double& f : formants) f *= 1.0 + uniform(rng, -0.03, 0.03);

  const double top = 0.5 * fs - 100.0;
  const auto max_harmonics =
      static_cast<std::size_t>(std::max(1.0, std::floor(top / (0.9 * voice.f0_min_hz))));
  std::vector<double> amp(max_harmonics + 1, 0.0);
  std::vector<double> harmonic(n, 0.0);

  constexpr std::size_t kBlock = 32;
  double phase = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / fs;
    const double f0 = (f0_start + (f0_end - f0_start) * t / dur) *
                      (1.0 + 0.02 * std::sin(2.0 * std::numbers::pi * vib_rate * t + vib_phase));
    if (i % kBlock == 0) {
      for (std::size_t k = 1; k <= max_harmonics; ++k) {
        const double fk = static_cast<double>(k) * f0;
        amp[k] = fk < top ? envelope(voice, formants, fk) : 0.0;
      }
    }
    phase += 2.0 * std::numbers::pi * f0 / fs;
    if (phase > 2.0 * std::numbers::pi) phase -= 2.0 * std::numbers::pi;
    // sin(kφ) by the Chebyshev recurrence s_k = 2cos(φ)s_{k-1} - s_{k-2}.
    const double c2 = 2.0 * std::cos(phase);
    double s_prev = 0.0, s_cur = std::sin(phase), acc = 0.0;
    for (std::size_t k = 1; k <= max_harmonics; ++k) {
      acc += amp[k] * s_cur;
      const double s_next = c2 * s_cur - s_prev;
      s_prev = s_cur;
      s_cur = s_next;
    }
    harmonic[i] = acc * (0.75 + 0.25 * std::sin(2.0 * std::numbers::pi * am_rate * t + am_phase));
  }

  double rms = 0.0;
  for (double v : harmonic) rms += v * v;
  rms = std::sqrt(rms / static_cast<double>(n));
  if (rms > 0.0) {
    for (double& v : harmonic) v /= rms;
  }
  std::normal_distribution<double> noise(0.0, 1.0);
  for (double& v : harmonic) v += voice.noise_floor * noise(rng);

  double peak = 0.0;
  for (double v : harmonic) peak = std::max(peak, std::abs(v));
  const double gain = peak > 0.0 ? 0.8 / peak : 0.0;
  Waveform w;
  w.sample_rate_hz = spec.sample_rate_hz;
  w.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    w.samples[i] = std::round(harmonic[i] * gain * 32767.0) / 32768.0;
  }
  return w;
}

std::vector<SynthUtterance> synth_utterances(const CorpusSpec& spec) {
  spec.validate();
  const auto voices = resolve_voices(spec);
  const int train = spec.train_utterances();
  std::vector<SynthUtterance> out;
  out.reserve(static_cast<std::size_t>(spec.num_speakers * spec.utterances_per_speaker));
  for (int s = 0; s < spec.num_speakers; ++s) {
    for (int u = 0; u < spec.utterances_per_speaker; ++u) {
      SynthUtterance utt;
      utt.speaker = s;
      utt.index = u;
      utt.global_id = s * spec.utterances_per_speaker + u;
      utt.train = u < train;
      utt.wave = synth_utterance(spec, voices[static_cast<std::size_t>(s)], s, u);
      out.push_back(std::move(utt));
    }
  }
  return out;
}

CorpusSplit synth_corpus(const CorpusSpec& spec) {
  FrameDatasetBuilder train(spec.chunking, spec.sample_rate_hz);
  FrameDatasetBuilder test(spec.chunking, spec.sample_rate_hz);
  for (const auto& u : synth_utterances(spec)) {
    (u.train ? train : test).add_utterance(u.wave, u.speaker, u.global_id);
  }
  return {std::move(train).build(spec.num_speakers), std::move(test).build(spec.num_speakers)};
}

void write_manifest(const std::filesystem::path& path, const std::vector<ManifestRow>& rows) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("manifest: cannot create " + path.string());
  out << "path,speaker_id,split\n";
  for (const auto& r : rows) out << r.path << ',' << r.speaker_id << ',' << r.split << '\n';
  if (!out) throw DataError("manifest: write failed for " + path.string());
}

std::vector<ManifestRow> read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("manifest: cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != "path,speaker_id,split") {
    throw DataError(path.string() + ":1: expected header 'path,speaker_id,split'");
  }
  std::vector<ManifestRow> rows;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, ',')) fields.push_back(f);
    if (fields.size() != 3) {
      throw DataError(fmt::format("{}:{}: expected 3 fields, got {}", path.string(), lineno, fields.size()));
    }
    ManifestRow r;
    r.path = fields[0];
    try {
      std::size_t used = 0;
      r.speaker_id = std::stoi(fields[1], &used);
      if (used != fields[1].size() || r.speaker_id < 0) throw std::invalid_argument("speaker_id");
    } catch (const std::exception&) {
      throw DataError(fmt::format("{}:{}: bad speaker_id '{}'", path.string(), lineno, fields[1]));
    }
    r.split = fields[2];
    if (r.split != "train" && r.split != "test") {
      throw DataError(fmt::format("{}:{}: split must be train or test, got '{}'", path.string(), lineno,
                                  r.split));
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

std::vector<ManifestRow> write_corpus(const CorpusSpec& spec, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::vector<ManifestRow> rows;
  for (const auto& u : synth_utterances(spec)) {
    ManifestRow r;
    r.path = fmt::format("spk{:03d}_utt{:03d}.wav", u.speaker, u.index);
    r.speaker_id = u.speaker;
    r.split = u.train ? "train" : "test";
    write_wav(dir / r.path, u.wave);
    rows.push_back(std::move(r));
  }
  write_manifest(dir / "manifest.csv", rows);
  return rows;
}

CorpusSplit load_dataset_dir(const std::filesystem::path& dir, const ChunkConfig& chunking) {
  const auto manifest = dir / "manifest.csv";
  if (!std::filesystem::exists(manifest)) {
    throw DataError("dataset: no manifest.csv in " + dir.string());
  }
  const auto rows = read_manifest(manifest);
  if (rows.empty()) throw DataError("dataset: manifest " + manifest.string() + " has no rows");
  int num_speakers = 0;
  for (const auto& r : rows) num_speakers = std::max(num_speakers, r.speaker_id + 1);

  std::vector<Waveform> waves;
  waves.reserve(rows.size());
  for (const auto& r : rows) waves.push_back(read_wav(dir / r.path));
  const int fs = waves.front().sample_rate_hz;
  for (std::size_t i = 0; i < waves.size(); ++i) {
    if (waves[i].sample_rate_hz != fs) {
      throw DataError(fmt::format("dataset: {} is sampled at {} Hz, expected {} Hz", rows[i].path,
                                  waves[i].sample_rate_hz, fs));
    }
  }
  FrameDatasetBuilder train(chunking, fs);
  FrameDatasetBuilder test(chunking, fs);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    (rows[i].split == "train" ? train : test)
        .add_utterance(waves[i], rows[i].speaker_id, static_cast<int>(i));
  }
  return {std::move(train).build(num_speakers), std::move(test).build(num_speakers)};
}

}  // namespace amsinc::signal
