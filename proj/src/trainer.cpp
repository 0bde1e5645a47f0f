// Copyright 2026 The amsinc Authors
//
// Licensed under the Apache License, Version 2.0

#include "amsinc/trainer.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <ostream>
#include <sstream>

#include <fmt/format.h>

#include "amsinc/parallel.hpp"

namespace amsinc::train {

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point since) {
  return std::chrono::duration<double, std::milli>(Clock::now() - since).count();
}

std::size_t argmax_row(const double* row, std::size_t n) {
  std::size_t best = 0;
  for (std::size_t j = 1; j < n; ++j)
    if (row[j] > row[best]) best = j;
  return best;
}

std::string format_margin(double m) {
  const double cents = m * 100.0;
  if (std::abs(cents - std::round(cents)) < 1e-9) return fmt::format("{:.2f}", m);
  return fmt::format("{:g}", m);
}

}  // namespace

std::size_t count_errors(const Tensor& posteriors, std::span<const int> labels) {
  const std::size_t classes = posteriors.dim(1);
  std::size_t errors = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (argmax_row(posteriors.data() + i * classes, classes) != static_cast<std::size_t>(labels[i])) ++errors;
  }
  return errors;
}

double fer_percent(const Tensor& posteriors, std::span<const int> labels) {
  if (labels.empty()) throw DataError("fer_percent: no frames");
  if (posteriors.rank() != 2 || posteriors.dim(0) != labels.size()) {
    throw DimensionError("fer_percent: posteriors " + shape_str(posteriors.shape()) + " do not match labels");
  }
  return 100.0 * static_cast<double>(count_errors(posteriors, labels)) / static_cast<double>(labels.size());
}

TrainState init_train_state(const TrainConfig& cfg) {
  cfg.validate();
  TrainState s;
  s.rng.seed(cfg.seed);
  s.model = net::init_model(cfg.model, s.rng);
  s.optim = optim::init_state(s.model.params);
  s.fingerprint = fingerprint(cfg);
  return s;
}

Batch sample_batch(const signal::FrameDataset& ds, std::size_t batch_size, std::mt19937_64& rng) {
  if (ds.size() == 0) throw DataError("sample_batch: empty dataset");
  if (batch_size == 0) throw ConfigError("sample_batch: batch_size must be positive");
  std::uniform_int_distribution<std::size_t> pick(0, ds.size() - 1);
  Batch b;
  b.frames = Tensor({batch_size, ds.frame_len});
  b.labels.resize(batch_size);
  b.indices.resize(batch_size);
  for (std::size_t i = 0; i < batch_size; ++i) {
    const std::size_t k = pick(rng);
    b.indices[i] = k;
    b.labels[i] = ds.labels[k];
    const auto src = ds.frame(k);
    std::copy(src.begin(), src.end(), b.frames.data() + i * ds.frame_len);
  }
  return b;
}

Batch slice_batch(const signal::FrameDataset& ds, std::size_t begin, std::size_t end) {
  if (begin >= end || end > ds.size()) {
    throw DimensionError(fmt::format("slice_batch: bad range [{}, {}) of {} frames", begin, end, ds.size()));
  }
  Batch b;
  b.frames = Tensor({end - begin, ds.frame_len});
  const auto src = ds.frames.values().subspan(begin * ds.frame_len, (end - begin) * ds.frame_len);
  std::copy(src.begin(), src.end(), b.frames.data());
  b.labels.assign(ds.labels.begin() + static_cast<std::ptrdiff_t>(begin),
                  ds.labels.begin() + static_cast<std::ptrdiff_t>(end));
  for (std::size_t i = begin; i < end; ++i) b.indices.push_back(i);
  return b;
}

StepStats train_step(TrainState& state, const Batch& batch, const TrainConfig& cfg) {
  auto& params = state.model.params;
  net::ForwardOptions fo;
  fo.training = true;
  fo.dropout_rng = &state.rng;
  const auto fwd = net::model_forward(state.model, batch.frames, fo);
  const Tensor& W = params[net::kClassifierName];
  const auto out = loss::compute_loss(fwd.embeddings, W, batch.labels, cfg.loss);

  StepStats st;
  st.loss = out.loss;
  st.errors = count_errors(out.posteriors, batch.labels);
  for (const double m : loss::decision_margins(fwd.embeddings, W, batch.labels, cfg.loss.eps_norm)) st.margin_sum += m;

  ParamSet grads = net::model_backward(out.grad_embeddings, fwd.cache, state.model);
  grads[net::kClassifierName] = out.grad_W;
  optim::rmsprop_step(params, grads, state.optim, cfg.optim);
  return st;
}

EpochStats train_epoch(TrainState& state, const signal::FrameDataset& train_ds, const TrainConfig& cfg) {
  double loss_sum = 0.0, margin_sum = 0.0;
  std::size_t errors = 0;
  for (std::size_t b = 0; b < cfg.batches_per_epoch; ++b) {
    const Batch batch = sample_batch(train_ds, cfg.batch_size, state.rng);
    StepStats st;
    try {
      st = train_step(state, batch, cfg);
    } catch (const NumericError& e) {
      throw NumericError(fmt::format("epoch {} batch {}: {}", state.epoch + 1, b, e.what()));
    }
    loss_sum += st.loss;
    errors += st.errors;
    margin_sum += st.margin_sum;
  }
  ++state.epoch;
  const double frames = static_cast<double>(cfg.batches_per_epoch * cfg.batch_size);
  return {loss_sum / static_cast<double>(cfg.batches_per_epoch), 100.0 * static_cast<double>(errors) / frames,
          margin_sum / frames};
}

Tensor embed_dataset(const net::Model& model, const signal::FrameDataset& ds, std::size_t chunk_size) {
  if (ds.size() == 0) throw DataError("embed_dataset: empty dataset");
  if (chunk_size == 0) throw ConfigError("embed_dataset: chunk_size must be positive");
  const std::size_t d = model.config.embedding_dim();
  Tensor out({ds.size(), d});
  for (std::size_t begin = 0; begin < ds.size(); begin += chunk_size) {
    const std::size_t end = std::min(ds.size(), begin + chunk_size);
    const auto fwd = net::model_forward(model, slice_batch(ds, begin, end).frames);
    std::copy(fwd.embeddings.values().begin(), fwd.embeddings.values().end(), out.data() + begin * d);
  }
  return out;
}

EvalResult evaluate_fer(const net::Model& model, const signal::FrameDataset& ds, const loss::LossConfig& loss_cfg,
                        std::size_t chunk_size) {
  if (ds.size() == 0) throw DataError("evaluate_fer: empty dataset");
  const Tensor emb = embed_dataset(model, ds, chunk_size);
  const Tensor& W = model.params[net::kClassifierName];
  loss::LossConfig margin_free = loss_cfg;
  margin_free.margin = 0.0;
  const auto out = loss::compute_loss(emb, W, ds.labels, margin_free);

  EvalResult r;
  r.frames = ds.size();
  r.errors = count_errors(out.posteriors, ds.labels);
  r.fer_percent = 100.0 * static_cast<double>(r.errors) / static_cast<double>(r.frames);
  r.loss = out.loss;
  double msum = 0.0;
  for (const double m : loss::decision_margins(emb, W, ds.labels, loss_cfg.eps_norm)) msum += m;
  r.margin_stat = msum / static_cast<double>(r.frames);
  return r;
}

std::string format_metrics_row(const MetricsRow& r) {
  return fmt::format("{},{},{:.17g},{:.17g},{:.17g},{:.17g}", r.epoch, r.split, r.loss, r.fer_percent, r.margin_stat,
                     r.wall_ms);
}

std::vector<MetricsRow> read_metrics(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open metrics file " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != kMetricsHeader) {
    throw DataError(path.string() + ": missing metrics header");
  }
  std::vector<MetricsRow> rows;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (f.size() != 6) throw DataError(fmt::format("{}:{}: expected 6 fields", path.string(), line_no));
    MetricsRow r;
    try {
      r.epoch = static_cast<std::uint32_t>(std::stoul(f[0]));
      r.split = f[1];
      r.loss = std::stod(f[2]);
      r.fer_percent = std::stod(f[3]);
      r.margin_stat = std::stod(f[4]);
      r.wall_ms = std::stod(f[5]);
    } catch (const std::logic_error&) {
      throw DataError(fmt::format("{}:{}: malformed number", path.string(), line_no));
    }
    rows.push_back(r);
  }
  return rows;
}

std::string margin_label(double m) { return "m=" + format_margin(m); }

std::string run_id(const loss::LossConfig& cfg) {
  if (cfg.kind == loss::LossKind::kSoftmax) return "softmax";
  return "am_m" + format_margin(cfg.margin);
}

RunResult run_training(const TrainConfig& cfg, const signal::FrameDataset& train_ds,
                       const signal::FrameDataset& test_ds, const RunOptions& opts) {
  cfg.validate();
  signal::validate_dataset(train_ds);
  signal::validate_dataset(test_ds);
  if (train_ds.frame_len != cfg.model.frame_len || test_ds.frame_len != cfg.model.frame_len) {
    throw DataError(fmt::format("dataset frames hold {} samples, model expects {}", train_ds.frame_len,
                                cfg.model.frame_len));
  }
  if (cfg.batch_size > train_ds.size()) {
    throw ConfigError(fmt::format("train.batch_size={} exceeds the {} training frames", cfg.batch_size,
                                  train_ds.size()));
  }
  set_num_threads(cfg.threads);

  RunResult res;
  res.run_id = run_id(cfg.loss);
  if (opts.resume != nullptr) {
    check_resumable(*opts.resume, cfg);
    res.state = *opts.resume;
  } else {
    res.state = init_train_state(cfg);
  }
  TrainState& st = res.state;

  std::ofstream metrics;
  const bool to_disk = !opts.out_dir.empty();
  const auto ckpt_path = opts.out_dir / fmt::format("ckpt_{}.amsn", res.run_id);
  if (to_disk) {
    std::filesystem::create_directories(opts.out_dir);
    const auto path = opts.out_dir / fmt::format("metrics_{}.csv", res.run_id);
    const bool append = opts.resume != nullptr && std::filesystem::exists(path);
    metrics.open(path, append ? std::ios::app : std::ios::trunc);
    if (!metrics) throw DataError("cannot write " + path.string());
    if (!append) metrics << kMetricsHeader << '\n';
  }
  auto emit = [&](MetricsRow row) {
    if (cfg.deterministic) row.wall_ms = 0.0;
    const std::string text = format_metrics_row(row);
    if (to_disk) metrics << text << '\n' << std::flush;
    if (opts.log != nullptr) *opts.log << res.run_id << ' ' << text << '\n' << std::flush;
    res.rows.push_back(std::move(row));
  };
  auto eval_row = [&]() {
    const auto t0 = Clock::now();
    const auto ev = evaluate_fer(st.model, test_ds, cfg.loss);
    emit({st.epoch, "test", ev.loss, ev.fer_percent, ev.margin_stat, elapsed_ms(t0)});
  };

  if (st.epoch == 0) eval_row();
  while (st.epoch < cfg.epochs) {
    if (opts.stop_after_epoch && st.epoch >= *opts.stop_after_epoch) break;
    const auto t0 = Clock::now();
    const auto es = train_epoch(st, train_ds, cfg);
    emit({st.epoch, "train", es.loss, es.fer_percent, es.margin_stat, elapsed_ms(t0)});
    if (st.epoch % cfg.eval_every == 0 || st.epoch == cfg.epochs) {
      eval_row();
      if (to_disk && opts.write_checkpoints) save_checkpoint(st, ckpt_path);
    }
  }
  if (to_disk && opts.write_checkpoints) save_checkpoint(st, ckpt_path);
  return res;
}

std::vector<double> parse_margin_range(const std::string& spec) {
  const auto first = spec.find_first_not_of(" \t");
  if (first == std::string::npos) return {};
  const std::string s = spec.substr(first, spec.find_last_not_of(" \t") - first + 1);
  std::vector<double> parts;
  std::size_t pos = 0;
  while (true) {
    const auto colon = s.find(':', pos);
    const std::string tok = s.substr(pos, colon == std::string::npos ? std::string::npos : colon - pos);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (tok.empty() || ec != std::errc() || ptr != tok.data() + tok.size()) {
      throw ConfigError(fmt::format("malformed margin range '{}': '{}' is not a number", spec, tok));
    }
    parts.push_back(v);
    if (colon == std::string::npos) break;
    pos = colon + 1;
  }
  if (parts.size() != 3) throw ConfigError(fmt::format("malformed margin range '{}': expected lo:hi:step", spec));
  const double lo = parts[0], hi = parts[1], step = parts[2];
  if (!(step > 0.0) || !(lo <= hi) || !(lo >= 0.0) || !(hi < 1.0)) {
    throw ConfigError(fmt::format("malformed margin range '{}': need 0 <= lo <= hi < 1 and step > 0", spec));
  }
  const auto count = static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9)) + 1;
  std::vector<double> out;
  for (std::size_t i = 0; i < count; ++i) out.push_back(std::round((lo + static_cast<double>(i) * step) * 1e12) / 1e12);
  return out;
}

SweepResult margin_sweep(const TrainConfig& base, std::span<const double> margins,
                         const signal::FrameDataset& train_ds, const signal::FrameDataset& test_ds,
                         const RunOptions& opts) {
  for (const double m : margins) {
    if (!(m >= 0.0 && m < 1.0)) throw ConfigError(fmt::format("margin_sweep: margin {} outside [0,1)", m));
  }
  RunOptions run_opts = opts;
  run_opts.resume = nullptr;

  SweepResult res;
  TrainConfig baseline = base;
  baseline.loss.kind = loss::LossKind::kSoftmax;
  res.runs.push_back(run_training(baseline, train_ds, test_ds, run_opts));
  res.summary.columns = {"epoch", "softmax"};
  for (const double m : margins) {
    TrainConfig c = base;
    c.loss.kind = loss::LossKind::kAmSoftmax;
    c.loss.margin = m;
    res.runs.push_back(run_training(c, train_ds, test_ds, run_opts));
    res.summary.columns.push_back(margin_label(m));
  }

  for (const auto& row : res.runs.front().rows)
    if (row.split == "test") res.summary.epochs.push_back(row.epoch);
  for (const std::uint32_t epoch : res.summary.epochs) {
    std::vector<double> cells;
    for (const auto& run : res.runs) {
      double v = std::nan("");
      for (const auto& row : run.rows)
        if (row.split == "test" && row.epoch == epoch) v = row.fer_percent;
      cells.push_back(v);
    }
    res.summary.cells.push_back(std::move(cells));
  }
  if (!opts.out_dir.empty()) write_sweep_summary(opts.out_dir / "sweep_summary.csv", res.summary);
  return res;
}

void write_sweep_summary(const std::filesystem::path& path, const SweepSummary& summary) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << fmt::format("{}\n", fmt::join(summary.columns, ","));
  for (std::size_t r = 0; r < summary.epochs.size(); ++r) {
    out << summary.epochs[r];
    for (const double v : summary.cells[r]) out << fmt::format(",{:.17g}", v);
    out << '\n';
  }
}

}  // namespace amsinc::train
