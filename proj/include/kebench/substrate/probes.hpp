// Copyright 2026 The kebench Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "kebench/substrate/transformer.hpp"

namespace kebench {

// Last prompt token, or an explicit token index (0 is BOS).
struct PositionSelector {
  std::optional<int> index;

  static PositionSelector last() { return {}; }
  static PositionSelector at(int i) { return {i}; }
  // Throws ValidationError when out of range for a sequence of n tokens.
  int resolve(int n_tokens) const;
};

// Reads the MLP down-projection input (length m) at a layer.
struct ActivationProbe {
  int layer = 0;
  PositionSelector position;
};

struct ProbePrompt {
  std::string text;
  PositionSelector position;
};

struct KeyMatrix {
  Matrix keys;                       // m x n
  std::vector<std::size_t> source;   // prompt index per column
  std::vector<int> positions;        // token position per column
  // Prompts that could not be probed: (prompt index, reason).
  std::vector<std::pair<std::size_t, std::string>> errors;
};

// One column per successfully probed prompt; a bad selector only skips that
// prompt. The probe's own position is ignored in favour of each prompt's.
KeyMatrix collect_keys(const TransformerModel& model, std::span<const ProbePrompt> prompts,
                       const ActivationProbe& probe);

// Keys at every position of a token sequence (m x T).
Matrix keys_at_layer(const TransformerModel& model, std::span<const int> tokens, int layer);

// (1/N) sum k k^T + ridge I. Throws EditorError when the keys are all zero and
// ridge is 0.
Matrix key_covariance(const Matrix& keys, double ridge);

// 1e-4 * trace(C) / m for the unregularized second moment C.
double default_ridge(const Matrix& second_moment);

struct CovarianceOptions {
  std::size_t max_tokens = 10000;
  // Negative selects default_ridge.
  double ridge = -1.0;
};

struct CovarianceEstimate {
  Matrix c;
  double ridge = 0.0;
  std::size_t n_tokens = 0;
};

// Keys over every non-BOS token position of the sample (texts longer than the
// window are split into window-sized chunks), capped at max_tokens.
CovarianceEstimate estimate_key_covariance(const TransformerModel& model,
                                           std::span<const std::string> corpus_sample, int layer,
                                           const CovarianceOptions& opts = {});

}  // namespace kebench
