// Copyright 2026 The amsinc Authors
//
// Licensed under the Apache License, Version 2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "amsinc/kvconfig.hpp"
#include "amsinc/loss.hpp"
#include "amsinc/network.hpp"
#include "amsinc/optim.hpp"
#include "amsinc/signal.hpp"

namespace amsinc::train {

struct TrainConfig {
  std::size_t batch_size = 128;
  std::size_t epochs = 40;
  std::size_t batches_per_epoch = 800;
  loss::LossConfig loss;
  optim::OptimConfig optim;
  /// frame_len 0 and num_speakers 0 are filled in from the data by resolve().
  net::ModelConfig model;
  std::uint64_t seed = 1;
  /// Reports wall_ms as 0 so metrics files are byte-reproducible.
  bool deterministic = true;
  std::size_t eval_every = 1;
  signal::ChunkConfig chunking;
  /// Worker cap; not part of the fingerprint.
  std::size_t threads = 1;

  void validate() const;
  /// Fills data-dependent model fields and checks them against the data.
  void resolve(std::size_t num_speakers, std::size_t frame_len);
};

/// Desk-scale preset: desk model, 40 epochs of 50 batches.
TrainConfig desk_train_config(std::size_t num_speakers);

/// Overrides fields of `base` with every key present; unknown keys throw.
TrainConfig parse_train_config(const config::KvConfig& kv, TrainConfig base = {});
/// One `key=value` line per fingerprinted field, in a fixed order.
std::string canonical_config(const TrainConfig& cfg);
/// "amsinc-config/<fnv1a-64 hex>\n" followed by canonical_config(cfg).
std::string fingerprint(const TrainConfig& cfg);
/// Inverse of fingerprint(); throws CheckpointError on a digest mismatch.
TrainConfig config_from_fingerprint(const std::string& fp);

std::uint64_t fnv1a64(std::string_view bytes);

struct TrainState {
  net::Model model;
  optim::OptimState optim;
  std::uint32_t epoch = 0;
  std::mt19937_64 rng;
  std::string fingerprint;
};

/// Seeds the rng from cfg.seed and draws the model initialization from it.
TrainState init_train_state(const TrainConfig& cfg);

struct Batch {
  Tensor frames;  // [B, T]
  std::vector<int> labels;
  std::vector<std::size_t> indices;
};

/// Uniform sampling with replacement.
Batch sample_batch(const signal::FrameDataset& ds, std::size_t batch_size, std::mt19937_64& rng);
/// Frames [begin, end) in dataset order.
Batch slice_batch(const signal::FrameDataset& ds, std::size_t begin, std::size_t end);

struct StepStats {
  double loss = 0.0;
  std::size_t errors = 0;
  double margin_sum = 0.0;  // Σ per-sample decision margins
};

/// forward → loss → backward → rmsprop_step on one batch.
StepStats train_step(TrainState& state, const Batch& batch, const TrainConfig& cfg);

struct EpochStats {
  double loss = 0.0;         // mean of batch losses
  double fer_percent = 0.0;  // over the sampled training frames
  double margin_stat = 0.0;
};

/// batches_per_epoch steps, then epoch += 1. A non-finite loss aborts with
/// the offending batch index.
EpochStats train_epoch(TrainState& state, const signal::FrameDataset& train_ds, const TrainConfig& cfg);

/// Frames whose posterior argmax (first on ties) differs from the label.
std::size_t count_errors(const Tensor& posteriors, std::span<const int> labels);
/// 100 · count_errors / #frames.
double fer_percent(const Tensor& posteriors, std::span<const int> labels);

struct EvalResult {
  double fer_percent = 0.0;
  double loss = 0.0;  // margin-free cross-entropy
  double margin_stat = 0.0;
  std::size_t frames = 0;
  std::size_t errors = 0;
};

/// Classifies every frame by the argmax of the margin-free posteriors.
EvalResult evaluate_fer(const net::Model& model, const signal::FrameDataset& ds, const loss::LossConfig& loss_cfg,
                        std::size_t chunk_size = 128);

/// Embeddings for every frame of ds, computed in chunks, [N, D].
Tensor embed_dataset(const net::Model& model, const signal::FrameDataset& ds, std::size_t chunk_size = 128);

struct MetricsRow {
  std::uint32_t epoch = 0;
  std::string split;  // "train" or "test"
  double loss = 0.0;
  double fer_percent = 0.0;
  double margin_stat = 0.0;
  double wall_ms = 0.0;

  bool operator==(const MetricsRow&) const = default;
};

inline constexpr const char* kMetricsHeader = "epoch,split,loss,fer_percent,margin_stat,wall_ms";
std::string format_metrics_row(const MetricsRow& row);
std::vector<MetricsRow> read_metrics(const std::filesystem::path& path);

std::string run_id(const loss::LossConfig& cfg);

struct RunOptions {
  /// Empty: nothing is written to disk.
  std::filesystem::path out_dir;
  bool write_checkpoints = true;
  /// Continue from this state; its fingerprint must match the config.
  const TrainState* resume = nullptr;
  /// Stop after this epoch as if interrupted (final checkpoint still written).
  std::optional<std::uint32_t> stop_after_epoch;
  std::ostream* log = nullptr;
};

struct RunResult {
  std::string run_id;
  std::vector<MetricsRow> rows;
  TrainState state;
};

/// The epoch loop: a test row at epoch 0 and after every eval_every epochs
/// (and the last), a train row per epoch, checkpoints on the test cadence.
RunResult run_training(const TrainConfig& cfg, const signal::FrameDataset& train_ds,
                       const signal::FrameDataset& test_ds, const RunOptions& opts = {});

/// Test FER per epoch, one column per run: epoch, softmax, m=..., ...
struct SweepSummary {
  std::vector<std::string> columns;
  std::vector<std::uint32_t> epochs;
  std::vector<std::vector<double>> cells;  // [epoch row][run]
};

struct SweepResult {
  std::vector<RunResult> runs;  // baseline first
  SweepSummary summary;
};

/// One run per margin plus the softmax baseline, all from the same seed.
SweepResult margin_sweep(const TrainConfig& base, std::span<const double> margins,
                         const signal::FrameDataset& train_ds, const signal::FrameDataset& test_ds,
                         const RunOptions& opts = {});

/// "lo:hi:step", inclusive of hi up to rounding; an empty string is no margins.
std::vector<double> parse_margin_range(const std::string& spec);
std::string margin_label(double m);

void write_sweep_summary(const std::filesystem::path& path, const SweepSummary& summary);

// ---- checkpoints ----------------------------------------------------------

enum class CheckpointErrorKind { kIo, kBadMagic, kVersion, kTruncated, kFingerprint, kFormat };

class CheckpointError : public DataError {
 public:
  CheckpointError(CheckpointErrorKind kind, const std::string& what) : DataError(what), kind_(kind) {}
  CheckpointErrorKind kind() const noexcept { return kind_; }

 private:
  CheckpointErrorKind kind_;
};

inline constexpr std::uint16_t kCheckpointVersion = 1;

std::vector<std::uint8_t> encode_checkpoint(const TrainState& state);
TrainState decode_checkpoint(std::span<const std::uint8_t> bytes);
void save_checkpoint(const TrainState& state, const std::filesystem::path& path);
TrainState load_checkpoint(const std::filesystem::path& path);

/// Throws CheckpointError(kFingerprint) unless state was produced under cfg.
void check_resumable(const TrainState& state, const TrainConfig& cfg);

}  // namespace amsinc::train
