// Copyright 2026 The kebench Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "kebench/substrate/language_model.hpp"

namespace kebench {

struct CollapseThresholds {
  double min_alnum_ratio = 0.5;
  double max_top_token_share = 0.5;
  double exact_match_baseline = 0.2;
};

struct CollapseReport {
  bool collapsed = false;
  double alnum_ratio = 0.0;      // mean over outputs
  double top_token_share = 0.0;  // most frequent word over all output words
  std::string top_token;
  std::optional<double> exact_match, exact_match_baseline;
  std::vector<std::string> triggers;  // alnum-ratio | token-repetition | exact-match-zero
  std::vector<std::string> samples;

  nlohmann::json to_json() const;
};

// Fraction of non-space characters that are letters or digits; 0 for empty.
double alnum_ratio(const std::string& text);

CollapseReport detect_collapse_outputs(const std::vector<std::string>& outputs,
                                       std::optional<double> exact_match,
                                       std::optional<double> exact_match_baseline,
                                       const CollapseThresholds& t = {});

// Needs at least 10 probe prompts; each is decoded greedily.
CollapseReport detect_collapse(const LanguageModel& model, const std::vector<std::string>& probes,
                               std::optional<double> exact_match = std::nullopt,
                               std::optional<double> exact_match_baseline = std::nullopt,
                               int max_tokens = 24, const CollapseThresholds& t = {});

std::vector<std::string> default_probe_prompts();

}  // namespace kebench
