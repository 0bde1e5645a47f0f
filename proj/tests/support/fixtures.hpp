// Copyright 2026 The amsinc Authors
//
// Licensed under the Apache License, Version 2.0

#pragma once

#include "amsinc/corpus.hpp"
#include "amsinc/gradcheck.hpp"
#include "amsinc/trainer.hpp"

namespace amsinc::fixture {

/// Three speakers, 25 ms frames: matches gradcheck::tiny_model_config().
inline signal::CorpusSpec tiny_corpus_spec(std::uint64_t seed = 3) {
  signal::CorpusSpec s;
  s.num_speakers = 3;
  s.utterances_per_speaker = 4;
  s.utterance_sec = 0.3;
  s.seed = seed;
  s.split_train = 3;
  s.split_test = 1;
  s.chunking = {25.0, 5.0};
  return s;
}

inline train::TrainConfig tiny_train_config() {
  train::TrainConfig c;
  c.model = gradcheck::tiny_model_config();
  c.batch_size = 8;
  c.epochs = 4;
  c.batches_per_epoch = 5;
  c.chunking = {25.0, 5.0};
  c.loss.margin = 0.35;
  c.optim.lr = 0.005;
  return c;
}

}  // namespace amsinc::fixture
