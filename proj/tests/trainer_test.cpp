// Copyright 2026 The amsinc Authors
//
// Licensed under the Apache License, Version 2.0

#include <cmath>
#include <fstream>
#include <random>

#include <gtest/gtest.h>

#include "amsinc/error.hpp"
#include "amsinc/trainer.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

namespace amsinc::train {
namespace {

signal::FrameDataset noise_dataset(std::size_t n, std::size_t len, int classes, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d;
  signal::FrameDataset ds;
  ds.num_speakers = classes;
  ds.frame_len = len;
  ds.frames = Tensor({n, len});
  for (double& v : ds.frames.values()) v = d(rng);
  for (std::size_t i = 0; i < n; ++i) {
    ds.labels.push_back(static_cast<int>(i % static_cast<std::size_t>(classes)));
    ds.utterance_id.push_back(static_cast<int>(i));
  }
  return ds;
}

class TinyCorpus : public ::testing::Test {
 protected:
  static void SetUpTestSuite() { corpus_ = new signal::CorpusSplit(signal::synth_corpus(fixture::tiny_corpus_spec())); }
  static void TearDownTestSuite() {
    delete corpus_;
    corpus_ = nullptr;
  }
  static signal::CorpusSplit* corpus_;
};

signal::CorpusSplit* TinyCorpus::corpus_ = nullptr;

TEST(SampleBatch, SingleFrameDataset) {
  const auto ds = noise_dataset(1, 4, 2, 1);
  std::mt19937_64 rng(1);
  const Batch b = sample_batch(ds, 1, rng);
  EXPECT_EQ(b.indices, std::vector<std::size_t>{0});
  EXPECT_EQ(b.frames.reshaped({4}), ds.frames.reshaped({4}));
  EXPECT_EQ(b.labels, std::vector<int>{0});
}

TEST(SampleBatch, SeededTwiceIsIdentical) {
  const auto ds = noise_dataset(50, 4, 5, 2);
  std::mt19937_64 a(9), b(9);
  const Batch x = sample_batch(ds, 16, a), y = sample_batch(ds, 16, b);
  EXPECT_EQ(x.indices, y.indices);
  EXPECT_EQ(x.frames, y.frames);
}

TEST(SampleBatch, UniformWithinThreeSigma) {
  const auto ds = noise_dataset(10, 2, 2, 3);
  std::mt19937_64 rng(10);
  std::vector<int> counts(10, 0);
  for (int i = 0; i < 1000; ++i)
    for (std::size_t idx : sample_batch(ds, 100, rng).indices) ++counts[idx];
  const double n = 1e5, p = 0.1, sigma = std::sqrt(n * p * (1 - p));
  for (int c : counts) EXPECT_LT(std::abs(c - n * p), 3 * sigma);
}

TEST(SampleBatch, EmptyDatasetIsRejected) {
  signal::FrameDataset ds;
  ds.num_speakers = 2;
  ds.frame_len = 4;
  std::mt19937_64 rng(1);
  EXPECT_THROW((void)sample_batch(ds, 1, rng), DataError);
}

TEST(Fer, CountsArgmaxMisses) {
  const Tensor p({4, 2}, {0.9, 0.1, 0.2, 0.8, 0.6, 0.4, 0.3, 0.7});
  EXPECT_EQ(fer_percent(p, std::vector<int>{0, 1, 0, 1}), 0.0);
  EXPECT_EQ(fer_percent(p, std::vector<int>{0, 1, 1, 1}), 25.0);
  const Tensor tie({1, 2}, {0.5, 0.5});
  EXPECT_EQ(count_errors(tie, std::vector<int>{0}), 0u);
  EXPECT_EQ(count_errors(tie, std::vector<int>{1}), 1u);
}

TEST(EvaluateFer, RandomModelIsNearChance) {
  const auto ds = noise_dataset(3000, 400, 3, 4);
  std::mt19937_64 rng(5);
  const auto model = net::init_model(gradcheck::tiny_model_config(), rng);
  const auto r = evaluate_fer(model, ds, {});
  EXPECT_NEAR(r.fer_percent, 100.0 * 2.0 / 3.0, 5.0);
  EXPECT_EQ(r.frames, 3000u);
}

TEST(EvaluateFer, PartitionDoesNotMatter) {
  const auto ds = noise_dataset(301, 400, 3, 6);
  std::mt19937_64 rng(7);
  const auto model = net::init_model(gradcheck::tiny_model_config(), rng);
  const auto ref = evaluate_fer(model, ds, {}, 301);
  for (std::size_t chunk : {1, 7, 64, 128}) {
    const auto r = evaluate_fer(model, ds, {}, chunk);
    EXPECT_EQ(r.errors, ref.errors) << chunk;
    EXPECT_EQ(r.fer_percent, ref.fer_percent) << chunk;
    EXPECT_NEAR(r.loss, ref.loss, 1e-12) << chunk;
  }
}

TEST_F(TinyCorpus, ZeroLearningRateFreezesParameters) {
  auto cfg = fixture::tiny_train_config();
  cfg.optim.lr = 0.0;
  cfg.batch_size = 1;
  TrainState st = init_train_state(cfg);
  const ParamSet before = st.model.params;
  signal::FrameDataset one = corpus_->train;
  one.frames = slice_batch(corpus_->train, 0, 1).frames;
  one.labels.resize(1);
  one.utterance_id.resize(1);
  const auto a = train_epoch(st, one, cfg);
  const auto b = train_epoch(st, one, cfg);
  EXPECT_EQ(st.model.params, before);
  EXPECT_EQ(a.loss, b.loss);
  EXPECT_EQ(st.epoch, 2u);
}

TEST_F(TinyCorpus, SingleBatchOverfit) {
  auto cfg = fixture::tiny_train_config();
  cfg.loss.margin = 0.4;
  cfg.optim.lr = 0.002;
  TrainState st = init_train_state(cfg);
  std::mt19937_64 rng(11);
  const Batch batch = sample_batch(corpus_->train, 8, rng);
  double loss = 0.0;
  for (int step = 0; step < 300; ++step) loss = train_step(st, batch, cfg).loss;
  EXPECT_LT(loss, 0.05);
}

TEST_F(TinyCorpus, RunIsDeterministicAndWellFormed) {
  auto cfg = fixture::tiny_train_config();
  cfg.eval_every = 2;
  const auto dir = oracle::scratch_dir("trainer_run");
  const auto a = run_training(cfg, corpus_->train, corpus_->test, {.out_dir = dir});
  const auto b = run_training(cfg, corpus_->train, corpus_->test);
  EXPECT_EQ(a.rows, b.rows);
  EXPECT_EQ(a.state.model.params, b.state.model.params);

  EXPECT_EQ(read_metrics(dir / "metrics_am_m0.35.csv"), a.rows);
  EXPECT_TRUE(std::filesystem::exists(dir / "ckpt_am_m0.35.amsn"));
  std::uint32_t last = 0;
  std::vector<std::uint32_t> test_epochs;
  for (const auto& r : a.rows) {
    EXPECT_GE(r.epoch, last);
    last = r.epoch;
    EXPECT_GE(r.fer_percent, 0.0);
    EXPECT_LE(r.fer_percent, 100.0);
    EXPECT_EQ(r.wall_ms, 0.0);
    if (r.split == "test") test_epochs.push_back(r.epoch);
  }
  EXPECT_EQ(test_epochs, (std::vector<std::uint32_t>{0, 2, 4}));
}

TEST_F(TinyCorpus, ResumeMatchesUninterruptedRun) {
  auto cfg = fixture::tiny_train_config();
  const auto full = run_training(cfg, corpus_->train, corpus_->test);

  const auto dir = oracle::scratch_dir("trainer_resume");
  const auto first = run_training(cfg, corpus_->train, corpus_->test, {.out_dir = dir, .stop_after_epoch = 2});
  const TrainState restored = load_checkpoint(dir / "ckpt_am_m0.35.amsn");
  EXPECT_EQ(restored.epoch, 2u);
  const auto second = run_training(cfg, corpus_->train, corpus_->test, {.out_dir = dir, .resume = &restored});

  auto rows = first.rows;
  rows.insert(rows.end(), second.rows.begin(), second.rows.end());
  EXPECT_EQ(rows, full.rows);
  EXPECT_EQ(second.state.model.params, full.state.model.params);
  EXPECT_EQ(second.state.optim.v, full.state.optim.v);
  EXPECT_EQ(read_metrics(dir / "metrics_am_m0.35.csv"), full.rows);
}

TEST_F(TinyCorpus, ResumeRefusesDifferentConfig) {
  auto cfg = fixture::tiny_train_config();
  const TrainState st = init_train_state(cfg);
  cfg.loss.margin = 0.5;
  try {
    (void)run_training(cfg, corpus_->train, corpus_->test, {.resume = &st});
    FAIL();
  } catch (const CheckpointError& e) {
    EXPECT_EQ(e.kind(), CheckpointErrorKind::kFingerprint);
  }
}

TEST_F(TinyCorpus, RejectsOversizedBatchAndFrameMismatch) {
  auto cfg = fixture::tiny_train_config();
  cfg.batch_size = corpus_->train.size() + 1;
  EXPECT_THROW(run_training(cfg, corpus_->train, corpus_->test), ConfigError);
  cfg = fixture::tiny_train_config();
  cfg.model.frame_len = 800;
  EXPECT_THROW(run_training(cfg, corpus_->train, corpus_->test), DataError);
}

TEST_F(TinyCorpus, SweepSharesInitialization) {
  auto cfg = fixture::tiny_train_config();
  cfg.epochs = 2;
  const std::vector<double> margins{0.35, 0.5, 0.8};
  const auto dir = oracle::scratch_dir("trainer_sweep");
  const auto res = margin_sweep(cfg, margins, corpus_->train, corpus_->test, {.out_dir = dir});
  ASSERT_EQ(res.runs.size(), 4u);
  EXPECT_EQ(res.runs[0].run_id, "softmax");
  EXPECT_EQ(res.summary.columns, (std::vector<std::string>{"epoch", "softmax", "m=0.35", "m=0.50", "m=0.80"}));
  for (std::size_t i = 2; i < res.runs.size(); ++i) EXPECT_EQ(res.runs[i].rows.front(), res.runs[1].rows.front());
  for (const auto& row : res.summary.cells) {
    EXPECT_EQ(row.size(), 4u);
    for (double v : row) EXPECT_TRUE(std::isfinite(v));
  }
  std::ifstream summary(dir / "sweep_summary.csv");
  std::string header;
  std::getline(summary, header);
  EXPECT_EQ(header, "epoch,softmax,m=0.35,m=0.50,m=0.80");
  for (const char* id : {"softmax", "am_m0.35", "am_m0.50", "am_m0.80"}) {
    EXPECT_TRUE(std::filesystem::exists(dir / (std::string("metrics_") + id + ".csv"))) << id;
  }
}

TEST_F(TinyCorpus, EmptySweepRunsBaselineOnly) {
  auto cfg = fixture::tiny_train_config();
  cfg.epochs = 1;
  const auto res = margin_sweep(cfg, {}, corpus_->train, corpus_->test);
  EXPECT_EQ(res.runs.size(), 1u);
  EXPECT_EQ(res.summary.columns.size(), 2u);
}

TEST(MarginRange, Parses) {
  EXPECT_EQ(parse_margin_range("0.5:0.5:0.05"), std::vector<double>{0.5});
  EXPECT_TRUE(parse_margin_range("").empty());
  const auto grid = parse_margin_range("0.35:0.80:0.05");
  ASSERT_EQ(grid.size(), 10u);
  EXPECT_EQ(grid.front(), 0.35);
  EXPECT_EQ(grid.back(), 0.8);
  EXPECT_EQ(grid[3], 0.5);
  for (const char* bad : {"0.5", "0.5:0.4:0.05", "a:b:c", "0.1:0.2:0", "0.1:1.0:0.1", "0.1:0.2:0.05:1"}) {
    EXPECT_THROW((void)parse_margin_range(bad), ConfigError) << bad;
  }
}

TEST(MarginRange, Labels) {
  EXPECT_EQ(margin_label(0.35), "m=0.35");
  EXPECT_EQ(margin_label(0.8), "m=0.80");
  EXPECT_EQ(margin_label(0.125), "m=0.125");
}

}  // namespace
}  // namespace amsinc::train
