// Copyright 2026 The amsinc Authors
//
// Licensed under the Apache License, Version 2.0

#pragma once

#include <iosfwd>

#include "amsinc/corpus.hpp"
#include "amsinc/kvconfig.hpp"

namespace amsinc::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitThreshold = 4;

/// Entry point shared by the `amsinc` binary and the tests. argv[0] is the
/// program name.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// `corpus.*` keys (and `data.*` chunking) of a synth spec file.
signal::CorpusSpec parse_corpus_spec(const config::KvConfig& kv);

const char* version_string();

}  // namespace amsinc::cli
