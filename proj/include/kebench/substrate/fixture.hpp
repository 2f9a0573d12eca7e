// Copyright 2026 The kebench Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "kebench/substrate/transformer.hpp"

namespace kebench {

// Deterministic plain-text corpus (one sentence per line) used to train the
// fixture tokenizer and model and to sample key covariances.
std::vector<std::string> fixture_corpus_lines(std::uint64_t seed = 7, int n_lines = 1500);

// Synthetic counterfactual facts: the prompt's learned continuation is swapped
// for a different word from the same category.
struct FixtureFact {
  std::string prompt;
  std::string target;
};
std::vector<FixtureFact> fixture_facts(int n = 10);

struct PretrainOptions {
  int steps = 600;
  int batch = 8;
  int seq_len = 48;
  double rate = 3e-3;
  double clip = 1.0;
  std::uint64_t seed = 11;
};

struct PretrainReport {
  double initial_loss = 0.0;
  double final_loss = 0.0;
  int steps = 0;
};

// Adam on next-token loss over sentence-aligned windows (each starting with
// BOS). Only used to give the fixture model readable greedy output.
PretrainReport pretrain(TransformerModel& model, const std::vector<std::string>& lines,
                        const PretrainOptions& opts);

struct FixtureOptions {
  Architecture architecture{};
  std::uint64_t seed = 1234;
  PretrainOptions pretrain{};
};

struct FixtureBuild {
  TransformerModel model;
  PretrainReport report;
};

// Tokenizer trained on the corpus, seeded random init, then pretraining.
FixtureBuild make_fixture_model(const FixtureOptions& opts = {});

}  // namespace kebench
