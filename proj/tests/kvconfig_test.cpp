// Copyright 2026 The amsinc Authors
//
// Licensed under the Apache License, Version 2.0

#include <gtest/gtest.h>

#include "amsinc/error.hpp"
#include "amsinc/kvconfig.hpp"
#include "amsinc/trainer.hpp"

namespace amsinc {
namespace {

using config::ConfigParseError;
using config::KvConfig;

TEST(KvConfig, ParsesTypedValues) {
  const auto kv = KvConfig::parse(
      "# comment\n"
      "\n"
      "  model.sinc.filters = 80  \n"
      "loss.s=30.5\n"
      "train.deterministic=false\n"
      "model.dense.widths=64, 64,64\n"
      "train.seed=+18446744073709551615\n"
      "name = hello world\n");
  EXPECT_EQ(kv.get_size("model.sinc.filters", 0), 80u);
  EXPECT_EQ(kv.get_double("loss.s", 0), 30.5);
  EXPECT_FALSE(kv.get_bool("train.deterministic", true));
  EXPECT_EQ(kv.get_size_list("model.dense.widths", {}), (std::vector<std::size_t>{64, 64, 64}));
  EXPECT_EQ(kv.get_u64("train.seed", 0), 18446744073709551615ULL);
  EXPECT_EQ(kv.get_string("name", ""), "hello world");
  EXPECT_EQ(kv.get_int("missing", -4), -4);
  EXPECT_TRUE(kv.unread_keys().empty());
}

TEST(KvConfig, BadValueNamesLineAndKey) {
  const auto kv = KvConfig::parse("a=1\nmodel.sinc.filters=eighty\n", "cfg.txt");
  try {
    (void)kv.get_size("model.sinc.filters", 0);
    FAIL();
  } catch (const ConfigParseError& e) {
    EXPECT_EQ(e.line(), 2);
    EXPECT_EQ(e.key(), "model.sinc.filters");
    const std::string msg = e.what();
    EXPECT_NE(msg.find("cfg.txt:2"), std::string::npos) << msg;
    EXPECT_NE(msg.find("model.sinc.filters"), std::string::npos) << msg;
  }
}

TEST(KvConfig, MalformedLinesAndDuplicates) {
  EXPECT_THROW(KvConfig::parse("just text\n"), ConfigParseError);
  EXPECT_THROW(KvConfig::parse("=3\n"), ConfigParseError);
  try {
    (void)KvConfig::parse("a=1\nb=2\na=3\n");
    FAIL();
  } catch (const ConfigParseError& e) {
    EXPECT_EQ(e.line(), 3);
    EXPECT_EQ(e.key(), "a");
  }
}

TEST(KvConfig, NumericEdgeCases) {
  const auto kv = KvConfig::parse("neg=-3\nfrac=1.5\nnan=nan\nflag=maybe\nlist=1,,2\n");
  EXPECT_THROW((void)kv.get_size("neg", 0), ConfigParseError);
  EXPECT_THROW((void)kv.get_int("frac", 0), ConfigParseError);
  EXPECT_THROW((void)kv.get_double("nan", 0), ConfigParseError);
  EXPECT_THROW((void)kv.get_bool("flag", false), ConfigParseError);
  EXPECT_THROW((void)kv.get_size_list("list", {}), ConfigParseError);
}

TEST(KvConfig, UnreadKeysAreRejected) {
  const auto kv = KvConfig::parse("optim.lr=0.1\noptim.lrr=0.2\n");
  (void)kv.get_double("optim.lr", 0);
  EXPECT_EQ(kv.unread_keys(), std::vector<std::string>{"optim.lrr"});
  EXPECT_THROW(kv.reject_unread(), ConfigParseError);
}

TEST(KvConfig, MissingFile) { EXPECT_THROW(KvConfig::load("/nonexistent/x.cfg"), ConfigError); }

TEST(TrainConfigText, OverridesAndRejectsUnknownKeys) {
  const auto kv = KvConfig::parse("loss.kind=softmax\noptim.lr=0.01\ntrain.batch_size=8\nmodel.conv.filters=4,4\n");
  const auto cfg = train::parse_train_config(kv, train::desk_train_config(3));
  EXPECT_EQ(cfg.loss.kind, loss::LossKind::kSoftmax);
  EXPECT_EQ(cfg.optim.lr, 0.01);
  EXPECT_EQ(cfg.batch_size, 8u);
  EXPECT_EQ(cfg.model.conv_filters, (std::vector<std::size_t>{4, 4}));
  EXPECT_EQ(cfg.model.sinc_filters, 16u);
  EXPECT_THROW(train::parse_train_config(KvConfig::parse("train.epochz=3\n")), ConfigParseError);
}

TEST(TrainConfigText, FingerprintRoundTrips) {
  auto cfg = train::desk_train_config(5);
  cfg.loss.margin = 0.35;
  cfg.seed = 99;
  const std::string fp = train::fingerprint(cfg);
  EXPECT_TRUE(fp.starts_with("amsinc-config/"));
  const auto back = train::config_from_fingerprint(fp);
  EXPECT_EQ(train::canonical_config(back), train::canonical_config(cfg));
  EXPECT_EQ(train::fingerprint(back), fp);

  auto threads = cfg;
  threads.threads = 4;
  EXPECT_EQ(train::fingerprint(threads), fp);
  auto other = cfg;
  other.loss.margin = 0.4;
  EXPECT_NE(train::fingerprint(other), fp);

  std::string tampered = fp;
  tampered.back() = tampered.back() == '0' ? '1' : '0';
  EXPECT_THROW(train::config_from_fingerprint(tampered), train::CheckpointError);
}

TEST(TrainConfigText, Fnv1aKnownValues) {
  EXPECT_EQ(train::fnv1a64(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(train::fnv1a64("a"), 0xaf63dc4c8601ec8cULL);
}

TEST(TrainConfigText, ValidateCatchesZeroCounts) {
  auto cfg = train::desk_train_config(3);
  cfg.batch_size = 0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = train::desk_train_config(3);
  cfg.loss.margin = 1.2;
  EXPECT_THROW(cfg.validate(), ConfigError);
}

}  // namespace
}  // namespace amsinc
