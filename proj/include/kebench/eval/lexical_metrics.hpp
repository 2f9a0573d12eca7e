// Copyright 2026 The kebench Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace kebench {

// Lowercased alphanumeric runs; everything else separates words.
std::vector<std::string> word_tokens(std::string_view text);

// LCS-based F-measure over word tokens; 0 when either side is empty.
double rouge_l(std::string_view candidate, std::string_view reference);
double rouge_l(const std::vector<std::string>& candidate, const std::vector<std::string>& reference);

// Geometric mean of clipped 1..4-gram precisions times the brevity penalty.
// Orders 2..4 use add-one smoothing so short texts do not zero out.
double bleu(std::string_view candidate, std::string_view reference);
double bleu(const std::vector<std::string>& candidate, const std::vector<std::string>& reference);

}  // namespace kebench
