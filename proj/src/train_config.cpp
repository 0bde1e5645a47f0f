// Copyright 2026 The amsinc Authors
//
// Licensed under the Apache License, Version 2.0

#include <fmt/format.h>

#include "amsinc/trainer.hpp"

namespace amsinc::train {

namespace {

constexpr std::string_view kFingerprintPrefix = "amsinc-config/";

std::string join(const std::vector<std::size_t>& v) { return fmt::format("{}", fmt::join(v, ",")); }
std::string num(double v) { return fmt::format("{:.17g}", v); }
std::string flag(bool b) { return b ? "true" : "false"; }

}  // namespace

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const char c : bytes) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

void TrainConfig::validate() const {
  if (batch_size == 0 || epochs == 0 || batches_per_epoch == 0 || eval_every == 0) {
    throw ConfigError("train: batch_size, epochs, batches_per_epoch and eval_every must be positive");
  }
  if (threads == 0) throw ConfigError("train: threads must be positive");
  loss.validate();
  optim.validate();
  chunking.validate();
  model.validate();
}

void TrainConfig::resolve(std::size_t num_speakers, std::size_t frame_len) {
  if (model.num_speakers == 0) model.num_speakers = num_speakers;
  if (model.frame_len == 0) model.frame_len = frame_len;
  if (model.num_speakers != num_speakers) {
    throw ConfigError(fmt::format("model.num_speakers={} but the data has {} speakers", model.num_speakers,
                                  num_speakers));
  }
  if (model.frame_len != frame_len) {
    throw ConfigError(fmt::format("model.frame_len={} but the data frames hold {} samples", model.frame_len,
                                  frame_len));
  }
  validate();
}

TrainConfig desk_train_config(std::size_t num_speakers) {
  TrainConfig c;
  c.batch_size = 16;
  c.epochs = 40;
  c.batches_per_epoch = 50;
  c.model = net::desk_model_config(num_speakers);
  c.eval_every = 1;
  return c;
}

TrainConfig parse_train_config(const config::KvConfig& kv, TrainConfig base) {
  TrainConfig c = std::move(base);
  auto& m = c.model;
  m.sample_rate_hz = static_cast<int>(kv.get_int("model.sample_rate_hz", m.sample_rate_hz));
  m.frame_len = kv.get_size("model.frame_len", m.frame_len);
  m.sinc_filters = kv.get_size("model.sinc.filters", m.sinc_filters);
  m.sinc_len = kv.get_size("model.sinc.length", m.sinc_len);
  m.sinc_min_low_hz = kv.get_double("model.sinc.min_low_hz", m.sinc_min_low_hz);
  m.sinc_min_band_hz = kv.get_double("model.sinc.min_band_hz", m.sinc_min_band_hz);
  m.conv_filters = kv.get_size_list("model.conv.filters", m.conv_filters);
  m.conv_kernels = kv.get_size_list("model.conv.kernel", m.conv_kernels);
  m.pool_widths = kv.get_size_list("model.pool", m.pool_widths);
  m.dense_widths = kv.get_size_list("model.dense.widths", m.dense_widths);
  m.leaky_slope = kv.get_double("model.leaky_slope", m.leaky_slope);
  m.rectify = kv.get_bool("model.rectify", m.rectify);
  m.dropout = kv.get_double("model.dropout", m.dropout);
  m.num_speakers = kv.get_size("model.num_speakers", m.num_speakers);

  if (kv.has("loss.kind")) c.loss.kind = loss::parse_loss_kind(kv.get_string("loss.kind", ""));
  c.loss.scale = kv.get_double("loss.s", c.loss.scale);
  c.loss.margin = kv.get_double("loss.m", c.loss.margin);
  c.loss.eps_div = kv.get_double("loss.eps_div", c.loss.eps_div);
  c.loss.eps_norm = kv.get_double("loss.eps_norm", c.loss.eps_norm);
  c.loss.normalize_baseline = kv.get_bool("loss.normalize_baseline", c.loss.normalize_baseline);

  c.optim.lr = kv.get_double("optim.lr", c.optim.lr);
  c.optim.alpha = kv.get_double("optim.alpha", c.optim.alpha);
  c.optim.eps = kv.get_double("optim.eps", c.optim.eps);

  c.batch_size = kv.get_size("train.batch_size", c.batch_size);
  c.epochs = kv.get_size("train.epochs", c.epochs);
  c.batches_per_epoch = kv.get_size("train.batches_per_epoch", c.batches_per_epoch);
  c.seed = kv.get_u64("train.seed", c.seed);
  c.deterministic = kv.get_bool("train.deterministic", c.deterministic);
  c.eval_every = kv.get_size("train.eval_every", c.eval_every);
  c.threads = kv.get_size("train.threads", c.threads);

  c.chunking.window_ms = kv.get_double("data.window_ms", c.chunking.window_ms);
  c.chunking.overlap_ms = kv.get_double("data.overlap_ms", c.chunking.overlap_ms);
  kv.reject_unread();
  return c;
}

std::string canonical_config(const TrainConfig& c) {
  const auto& m = c.model;
  std::string s;
  auto line = [&s](std::string_view k, const std::string& v) { s += fmt::format("{}={}\n", k, v); };
  line("model.sample_rate_hz", std::to_string(m.sample_rate_hz));
  line("model.frame_len", std::to_string(m.frame_len));
  line("model.sinc.filters", std::to_string(m.sinc_filters));
  line("model.sinc.length", std::to_string(m.sinc_len));
  line("model.sinc.min_low_hz", num(m.sinc_min_low_hz));
  line("model.sinc.min_band_hz", num(m.sinc_min_band_hz));
  line("model.conv.filters", join(m.conv_filters));
  line("model.conv.kernel", join(m.conv_kernels));
  line("model.pool", join(m.pool_widths));
  line("model.dense.widths", join(m.dense_widths));
  line("model.leaky_slope", num(m.leaky_slope));
  line("model.rectify", flag(m.rectify));
  line("model.dropout", num(m.dropout));
  line("model.num_speakers", std::to_string(m.num_speakers));
  line("loss.kind", loss::to_string(c.loss.kind));
  line("loss.s", num(c.loss.scale));
  line("loss.m", num(c.loss.margin));
  line("loss.eps_div", num(c.loss.eps_div));
  line("loss.eps_norm", num(c.loss.eps_norm));
  line("loss.normalize_baseline", flag(c.loss.normalize_baseline));
  line("optim.lr", num(c.optim.lr));
  line("optim.alpha", num(c.optim.alpha));
  line("optim.eps", num(c.optim.eps));
  line("train.batch_size", std::to_string(c.batch_size));
  line("train.epochs", std::to_string(c.epochs));
  line("train.batches_per_epoch", std::to_string(c.batches_per_epoch));
  line("train.seed", std::to_string(c.seed));
  line("train.deterministic", flag(c.deterministic));
  line("train.eval_every", std::to_string(c.eval_every));
  line("data.window_ms", num(c.chunking.window_ms));
  line("data.overlap_ms", num(c.chunking.overlap_ms));
  return s;
}

std::string fingerprint(const TrainConfig& cfg) {
  const std::string body = canonical_config(cfg);
  return fmt::format("{}{:016x}\n{}", kFingerprintPrefix, fnv1a64(body), body);
}

TrainConfig config_from_fingerprint(const std::string& fp) {
  const auto nl = fp.find('\n');
  if (!fp.starts_with(kFingerprintPrefix) || nl == std::string::npos) {
    throw CheckpointError(CheckpointErrorKind::kFormat, "checkpoint fingerprint is not an amsinc config");
  }
  const std::string digest = fp.substr(kFingerprintPrefix.size(), nl - kFingerprintPrefix.size());
  const std::string body = fp.substr(nl + 1);
  if (digest != fmt::format("{:016x}", fnv1a64(body))) {
    throw CheckpointError(CheckpointErrorKind::kFormat, "checkpoint fingerprint digest does not match its text");
  }
  TrainConfig base;
  base.model.num_speakers = 0;
  return parse_train_config(config::KvConfig::parse(body, "<checkpoint fingerprint>"), base);
}

void check_resumable(const TrainState& state, const TrainConfig& cfg) {
  const std::string expected = fingerprint(cfg);
  if (state.fingerprint != expected) {
    const auto a = state.fingerprint.substr(0, state.fingerprint.find('\n'));
    const auto b = expected.substr(0, expected.find('\n'));
    throw CheckpointError(CheckpointErrorKind::kFingerprint,
                          fmt::format("resume refused: checkpoint config {} differs from requested config {}", a, b));
  }
}

}  // namespace amsinc::train
