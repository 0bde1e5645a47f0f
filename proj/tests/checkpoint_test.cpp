// Copyright 2026 The amsinc Authors
//
// Licensed under the Apache License, Version 2.0

#include <cstring>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "amsinc/error.hpp"
#include "amsinc/trainer.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

namespace amsinc::train {
namespace {

/// Container writer built from the published layout alone.
class LayoutWriter {
 public:
  template <typename T>
  void scalar(T v) {
    std::uint8_t b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    bytes.insert(bytes.end(), b, b + sizeof(T));
  }
  void text(const std::string& s) { bytes.insert(bytes.end(), s.begin(), s.end()); }
  void tensor(const std::string& name, const Tensor& t, bool f32) {
    scalar(static_cast<std::uint16_t>(name.size()));
    text(name);
    scalar(static_cast<std::uint8_t>(t.rank()));
    for (auto d : t.shape()) scalar(static_cast<std::uint32_t>(d));
    scalar(static_cast<std::uint8_t>(f32 ? 1 : 0));
    for (double v : t.values()) {
      if (f32) {
        scalar(static_cast<float>(v));
      } else {
        scalar(v);
      }
    }
  }
  std::vector<std::uint8_t> bytes;
};

std::vector<std::uint8_t> encode_by_layout(const TrainState& st, bool f32) {
  LayoutWriter w;
  w.text("AMSN");
  w.scalar(std::uint16_t{1});
  w.scalar(static_cast<std::uint32_t>(st.fingerprint.size()));
  w.text(st.fingerprint);
  w.scalar(static_cast<std::uint32_t>(2 * st.model.params.size() + 1));
  for (const auto& e : st.model.params) w.tensor(e.name, e.value, f32);
  for (const auto& e : st.optim.v) w.tensor("optim.v." + e.name, e.value, f32);
  w.tensor("optim.step", Tensor({1}, static_cast<double>(st.optim.step)), f32);
  std::ostringstream rng;
  rng << st.rng;
  w.scalar(static_cast<std::uint32_t>(rng.str().size()));
  w.text(rng.str());
  w.scalar(st.epoch);
  return std::move(w.bytes);
}

TrainState trained_state() {
  const auto corpus = signal::synth_corpus(fixture::tiny_corpus_spec());
  auto cfg = fixture::tiny_train_config();
  TrainState st = init_train_state(cfg);
  train_epoch(st, corpus.train, cfg);
  return st;
}

CheckpointErrorKind decode_error(const std::vector<std::uint8_t>& bytes) {
  try {
    (void)decode_checkpoint(bytes);
  } catch (const CheckpointError& e) {
    return e.kind();
  }
  ADD_FAILURE() << "decode succeeded";
  return CheckpointErrorKind::kIo;
}

class Checkpoint : public ::testing::Test {
 protected:
  static void SetUpTestSuite() { state_ = new TrainState(trained_state()); }
  static void TearDownTestSuite() {
    delete state_;
    state_ = nullptr;
  }
  static TrainState* state_;
};

TrainState* Checkpoint::state_ = nullptr;

TEST_F(Checkpoint, MatchesPublishedLayout) {
  EXPECT_EQ(encode_checkpoint(*state_), encode_by_layout(*state_, false));
}

TEST_F(Checkpoint, RoundTripIsBitExact) {
  const auto dir = oracle::scratch_dir("ckpt_rt");
  save_checkpoint(*state_, dir / "a.amsn");
  const TrainState back = load_checkpoint(dir / "a.amsn");
  EXPECT_EQ(back.model.params, state_->model.params);
  EXPECT_EQ(back.optim.v, state_->optim.v);
  EXPECT_EQ(back.optim.step, state_->optim.step);
  EXPECT_EQ(back.epoch, state_->epoch);
  EXPECT_EQ(back.fingerprint, state_->fingerprint);
  EXPECT_TRUE(back.rng == state_->rng);
  save_checkpoint(back, dir / "b.amsn");
  std::ifstream a(dir / "a.amsn", std::ios::binary), b(dir / "b.amsn", std::ios::binary);
  std::stringstream sa, sb;
  sa << a.rdbuf();
  sb << b.rdbuf();
  EXPECT_EQ(sa.str(), sb.str());
  EXPECT_FALSE(std::filesystem::exists(dir / "a.amsn.tmp"));
}

TEST_F(Checkpoint, SinglePrecisionPayloadsLoad) {
  const TrainState back = decode_checkpoint(encode_by_layout(*state_, true));
  for (const auto& e : state_->model.params) {
    const Tensor& got = back.model.params[e.name];
    for (std::size_t i = 0; i < got.size(); ++i)
      ASSERT_EQ(got[i], static_cast<double>(static_cast<float>(e.value[i]))) << e.name;
  }
}

TEST_F(Checkpoint, CorruptMagic) {
  auto bytes = encode_checkpoint(*state_);
  bytes[0] = 'X';
  EXPECT_EQ(decode_error(bytes), CheckpointErrorKind::kBadMagic);
}

TEST_F(Checkpoint, VersionMismatch) {
  auto bytes = encode_checkpoint(*state_);
  bytes[4] = 7;
  EXPECT_EQ(decode_error(bytes), CheckpointErrorKind::kVersion);
}

TEST_F(Checkpoint, EveryTruncationIsDetected) {
  const auto bytes = encode_checkpoint(*state_);
  for (std::size_t n = 0; n < bytes.size(); n += 1 + n / 64) {
    const std::vector<std::uint8_t> cut(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(n));
    const auto kind = decode_error(cut);
    EXPECT_TRUE(kind == CheckpointErrorKind::kTruncated || (n < 4 && kind == CheckpointErrorKind::kBadMagic)) << n;
  }
}

TEST_F(Checkpoint, TrailingBytesAndForeignTensors) {
  auto bytes = encode_checkpoint(*state_);
  bytes.push_back(0);
  EXPECT_EQ(decode_error(bytes), CheckpointErrorKind::kFormat);

  TrainState extra = *state_;
  extra.model.params.add("stray", Tensor({2}));
  extra.optim.v.add("stray", Tensor({2}));
  EXPECT_EQ(decode_error(encode_checkpoint(extra)), CheckpointErrorKind::kFormat);
}

TEST_F(Checkpoint, FingerprintMismatchRefusesResume) {
  auto cfg = fixture::tiny_train_config();
  EXPECT_NO_THROW(check_resumable(*state_, cfg));
  cfg.seed = 2;
  try {
    check_resumable(*state_, cfg);
    FAIL();
  } catch (const CheckpointError& e) {
    EXPECT_EQ(e.kind(), CheckpointErrorKind::kFingerprint);
  }
}

TEST(CheckpointIo, MissingFile) {
  try {
    (void)load_checkpoint("/nonexistent/ckpt.amsn");
    FAIL();
  } catch (const CheckpointError& e) {
    EXPECT_EQ(e.kind(), CheckpointErrorKind::kIo);
  }
}

}  // namespace
}  // namespace amsinc::train
