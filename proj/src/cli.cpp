// Copyright 2026 The amsinc Authors
//
// Licensed under the Apache License, Version 2.0

#include "amsinc/cli.hpp"

#include <chrono>
#include <ctime>
#include <fstream>
#include <optional>
#include <ostream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include "amsinc/gradcheck.hpp"
#include "amsinc/parallel.hpp"
#include "amsinc/spectrum.hpp"
#include "amsinc/trainer.hpp"

#ifndef AMSINC_VERSION
#define AMSINC_VERSION "unknown"
#endif

namespace amsinc::cli {

namespace {

namespace fs = std::filesystem;

class ThresholdFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_manifest(const fs::path& out_dir, const std::string& command, const std::string& config_path,
                    std::uint64_t seed, const std::vector<std::string>& args) {
  fs::create_directories(out_dir);
  nlohmann::json j;
  j["command"] = command;
  j["config"] = config_path;
  j["seed"] = seed;
  j["out_dir"] = out_dir.string();
  j["version"] = version_string();
  j["timestamp"] = utc_timestamp();
  j["args"] = args;
  std::ofstream f(out_dir / "run_manifest.json", std::ios::trunc);
  if (!f) throw DataError("cannot write " + (out_dir / "run_manifest.json").string());
  f << j.dump(2) << '\n';
}

struct TrainArgs {
  std::string config;
  std::string data;
  std::string out;
  std::string preset = "full";
  std::optional<std::string> loss;
  std::optional<double> margin;
  std::optional<std::uint64_t> seed;
  bool normalize_baseline = false;
  std::size_t threads = 1;
};

void add_train_options(CLI::App* cmd, TrainArgs& a) {
  cmd->add_option("--config", a.config, "key=value config file")->required()->check(CLI::ExistingFile);
  cmd->add_option("--data", a.data, "corpus directory with manifest.csv")->required();
  cmd->add_option("--out", a.out, "output directory")->required();
  cmd->add_option("--preset", a.preset, "defaults the config file overrides")
      ->check(CLI::IsMember({"full", "desk"}));
  cmd->add_option("--seed", a.seed, "override train.seed");
  cmd->add_flag("--normalize-baseline", a.normalize_baseline, "softmax head on s·cos logits");
  cmd->add_option("--threads", a.threads, "worker cap")->check(CLI::PositiveNumber);
}

train::TrainConfig build_train_config(const TrainArgs& a) {
  train::TrainConfig base = a.preset == "desk" ? train::desk_train_config(0) : train::TrainConfig{};
  base.model.num_speakers = 0;
  base.model.frame_len = 0;
  auto cfg = train::parse_train_config(config::KvConfig::load(a.config), base);
  if (a.loss) cfg.loss.kind = loss::parse_loss_kind(*a.loss);
  if (a.margin) cfg.loss.margin = *a.margin;
  if (a.seed) cfg.seed = *a.seed;
  if (a.normalize_baseline) cfg.loss.normalize_baseline = true;
  cfg.threads = a.threads;
  return cfg;
}

signal::CorpusSplit load_data(const std::string& dir, train::TrainConfig& cfg) {
  if (!fs::is_directory(dir)) throw DataError("data directory " + dir + " does not exist");
  auto data = signal::load_dataset_dir(dir, cfg.chunking);
  cfg.resolve(static_cast<std::size_t>(data.train.num_speakers), data.train.frame_len);
  return data;
}

std::vector<std::string> arg_list(int argc, const char* const* argv) { return {argv, argv + argc}; }

}  // namespace

const char* version_string() { return AMSINC_VERSION; }

signal::CorpusSpec parse_corpus_spec(const config::KvConfig& kv) {
  signal::CorpusSpec s;
  s.num_speakers = static_cast<int>(kv.get_int("corpus.num_speakers", s.num_speakers));
  s.utterances_per_speaker = static_cast<int>(kv.get_int("corpus.utterances_per_speaker", s.utterances_per_speaker));
  s.utterance_sec = kv.get_double("corpus.utterance_sec", s.utterance_sec);
  s.sample_rate_hz = static_cast<int>(kv.get_int("corpus.sample_rate_hz", s.sample_rate_hz));
  s.seed = kv.get_u64("corpus.seed", s.seed);
  s.split_train = static_cast<int>(kv.get_int("corpus.split_train", s.split_train));
  s.split_test = static_cast<int>(kv.get_int("corpus.split_test", s.split_test));
  s.chunking.window_ms = kv.get_double("data.window_ms", s.chunking.window_ms);
  s.chunking.overlap_ms = kv.get_double("data.overlap_ms", s.chunking.overlap_ms);
  bool any_voice = false;
  for (const auto& k : kv.keys()) any_voice = any_voice || k.starts_with("corpus.voice.");
  if (any_voice && s.num_speakers > 0) {
    for (int i = 0; i < s.num_speakers; ++i) {
      const std::string p = fmt::format("corpus.voice.{}.", i);
      signal::VoiceModel v;
      v.f0_min_hz = kv.get_double(p + "f0_min_hz", v.f0_min_hz);
      v.f0_max_hz = kv.get_double(p + "f0_max_hz", v.f0_max_hz);
      for (std::size_t f = 0; f < 3; ++f) {
        v.formant_hz[f] = kv.get_double(fmt::format("{}formant{}_hz", p, f + 1), v.formant_hz[f]);
        v.formant_bw_hz[f] = kv.get_double(fmt::format("{}formant{}_bw_hz", p, f + 1), v.formant_bw_hz[f]);
      }
      v.noise_floor = kv.get_double(p + "noise_floor", v.noise_floor);
      s.voices.push_back(v);
    }
  }
  kv.reject_unread();
  s.validate();
  return s;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Sinc-filter speaker recognition with an additive-margin softmax head", "amsinc"};
  app.require_subcommand(1);
  app.set_version_flag("--version", version_string());

  // synth
  std::string spec_path, synth_out;
  std::optional<std::uint64_t> synth_seed;
  auto* synth = app.add_subcommand("synth", "write a synthetic speaker corpus (WAV + manifest.csv)");
  synth->add_option("--spec", spec_path, "corpus spec file")->required()->check(CLI::ExistingFile);
  synth->add_option("--out", synth_out, "output directory")->required();
  synth->add_option("--seed", synth_seed, "override corpus.seed");

  // train
  TrainArgs ta;
  std::string resume;
  std::string loss_kind;
  double margin = 0.0;
  auto* trn = app.add_subcommand("train", "train one model and write metrics and checkpoints");
  add_train_options(trn, ta);
  auto* loss_opt = trn->add_option("--loss", loss_kind, "classifier head")->check(CLI::IsMember({"softmax", "am"}));
  auto* margin_opt = trn->add_option("--margin", margin, "additive margin m")->check(CLI::Range(0.0, 0.999999));
  trn->add_option("--resume", resume, "checkpoint to continue from")->check(CLI::ExistingFile);

  // eval
  std::string eval_ckpt, eval_data, eval_split = "test";
  std::size_t eval_threads = 1;
  auto* evl = app.add_subcommand("eval", "print FER, loss and margin statistic of a checkpoint as a metrics row");
  evl->add_option("--ckpt", eval_ckpt, "checkpoint")->required()->check(CLI::ExistingFile);
  evl->add_option("--data", eval_data, "corpus directory")->required();
  evl->add_option("--split", eval_split, "which split to score")->check(CLI::IsMember({"test", "train"}));
  evl->add_option("--threads", eval_threads, "worker cap")->check(CLI::PositiveNumber);

  // sweep
  TrainArgs sa;
  std::string margins = "0.35:0.80:0.05";
  auto* swp = app.add_subcommand("sweep", "train the softmax baseline and one model per margin");
  add_train_options(swp, sa);
  swp->add_option("--margins", margins, "lo:hi:step, or empty for the baseline only");

  // gradcheck
  std::string gc_size = "tiny";
  double gc_threshold = 1e-5;
  std::uint64_t gc_seed = 1;
  std::size_t gc_threads = 1;
  auto* gck = app.add_subcommand("gradcheck", "compare every analytic gradient with central differences");
  gck->add_option("--size", gc_size, "model size")->check(CLI::IsMember({"tiny", "small"}));
  gck->add_option("--threshold", gc_threshold, "largest accepted relative error (exclusive)");
  gck->add_option("--seed", gc_seed, "instance seed");
  gck->add_option("--threads", gc_threads, "worker cap")->check(CLI::PositiveNumber);

  // export-filters
  std::string ex_ckpt, ex_out;
  auto* exf = app.add_subcommand("export-filters", "write sinc filter taps and magnitude responses as CSV");
  exf->add_option("--ckpt", ex_ckpt, "checkpoint")->required()->check(CLI::ExistingFile);
  exf->add_option("--out", ex_out, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  const auto args = arg_list(argc, argv);
  try {
    if (synth->parsed()) {
      auto spec = parse_corpus_spec(config::KvConfig::load(spec_path));
      if (synth_seed) spec.seed = *synth_seed;
      write_manifest(synth_out, "synth", spec_path, spec.seed, args);
      const auto rows = signal::write_corpus(spec, synth_out);
      out << fmt::format("wrote {} utterances and manifest.csv to {}\n", rows.size(), synth_out);
    } else if (trn->parsed()) {
      if (*loss_opt) ta.loss = loss_kind == "am" ? "am_softmax" : "softmax";
      if (*margin_opt) ta.margin = margin;
      auto cfg = build_train_config(ta);
      const auto data = load_data(ta.data, cfg);
      std::optional<train::TrainState> resumed;
      train::RunOptions opts;
      opts.out_dir = ta.out;
      opts.log = &out;
      if (!resume.empty()) {
        resumed = train::load_checkpoint(resume);
        opts.resume = &*resumed;
      }
      write_manifest(ta.out, "train", ta.config, cfg.seed, args);
      train::run_training(cfg, data.train, data.test, opts);
    } else if (evl->parsed()) {
      set_num_threads(eval_threads);
      const auto state = train::load_checkpoint(eval_ckpt);
      auto cfg = train::config_from_fingerprint(state.fingerprint);
      if (!fs::is_directory(eval_data)) throw DataError("data directory " + eval_data + " does not exist");
      const auto data = signal::load_dataset_dir(eval_data, cfg.chunking);
      const auto& ds = eval_split == "test" ? data.test : data.train;
      if (ds.frame_len != cfg.model.frame_len) {
        throw DataError(fmt::format("data frames hold {} samples, checkpoint model expects {}", ds.frame_len,
                                    cfg.model.frame_len));
      }
      const auto ev = train::evaluate_fer(state.model, ds, cfg.loss);
      out << train::kMetricsHeader << '\n'
          << train::format_metrics_row({state.epoch, eval_split, ev.loss, ev.fer_percent, ev.margin_stat, 0.0})
          << '\n';
    } else if (swp->parsed()) {
      const auto grid = train::parse_margin_range(margins);
      auto cfg = build_train_config(sa);
      const auto data = load_data(sa.data, cfg);
      write_manifest(sa.out, "sweep", sa.config, cfg.seed, args);
      train::RunOptions opts;
      opts.out_dir = sa.out;
      opts.log = &out;
      const auto res = train::margin_sweep(cfg, grid, data.train, data.test, opts);
      out << fmt::format("wrote {} with {} runs\n", (fs::path(sa.out) / "sweep_summary.csv").string(),
                         res.runs.size());
    } else if (gck->parsed()) {
      set_num_threads(gc_threads);
      const auto t0 = std::chrono::steady_clock::now();
      const auto report = gradcheck::run_suite(gradcheck::parse_size(gc_size), gc_seed);
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      out << "module,worst_rel_error\n";
      for (const auto& [module, worst] : report.worst_per_module()) out << fmt::format("{},{:.3e}\n", module, worst);
      const bool pass = report.worst() < gc_threshold;
      out << fmt::format("overall,{:.3e}\n{} threshold {:.3e} ({} checks)\n", report.worst(), pass ? "PASS" : "FAIL",
                         gc_threshold, report.checks.size());
      err << fmt::format("gradcheck took {:.2f} s\n", secs);
      if (!pass) {
        for (const auto& c : report.checks) {
          if (!(c.rel_error < gc_threshold)) err << fmt::format("  {} {}: {:.3e}\n", c.module, c.name, c.rel_error);
        }
        throw ThresholdFailure("gradient check above threshold");
      }
    } else if (exf->parsed()) {
      const auto state = train::load_checkpoint(ex_ckpt);
      write_manifest(ex_out, "export-filters", ex_ckpt, 0, args);
      const auto paths = spectrum::export_filters(net::sinc_params(state.model), ex_out);
      out << paths.taps.string() << '\n' << paths.response.string() << '\n';
    }
  } catch (const ThresholdFailure& e) {
    err << "amsinc: " << e.what() << '\n';
    return kExitThreshold;
  } catch (const Error& e) {
    err << "amsinc: " << e.what() << '\n';
    return kExitData;
  } catch (const fs::filesystem_error& e) {
    err << "amsinc: " << e.what() << '\n';
    return kExitData;
  }
  return kExitOk;
}

}  // namespace amsinc::cli
