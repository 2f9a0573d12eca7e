// Copyright 2026 The kebench Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "kebench/paradigms/qa_item.hpp"

namespace kebench {

// Bijection between original and permuted option positions.
struct LetterMap {
  std::vector<int> order;  // order[new position] = original position

  static LetterMap identity(int n);
  char to_permuted(char original) const;
  char to_original(char permuted) const;
  LetterMap inverse() const;
  bool is_identity() const;
};

struct PermutedItem {
  QAItem item;  // options reordered, gold letter tracked
  LetterMap map;
  std::uint64_t seed = 0;
};

// Seed 0 is the identity; any other seed draws a Fisher-Yates shuffle.
PermutedItem permute_options(const QAItem& item, std::uint64_t seed);

// Cascade: "final answer" marker, then the first standalone option letter,
// then a unique option-text match. nullopt means unextractable.
std::optional<char> extract_answer(const std::string& raw, const std::vector<std::string>& options);

struct Prediction {
  std::string item_id;
  std::string set;  // ori | gen | ret, or an external benchmark split
  std::string raw_output;
  std::optional<std::string> rationale;
  std::optional<char> letter;  // permuted letter; nullopt = unextractable
  char gold_letter = 'A';      // permuted gold
  std::uint64_t permutation_seed = 0;
  std::string error;  // per-item failure such as a context overflow

  bool correct() const { return error.empty() && letter && *letter == gold_letter; }
  bool unextractable() const { return error.empty() && !letter; }
  nlohmann::json to_json() const;
};

// correct / |set|. Every prediction must carry `set`; an empty input raises
// UndefinedMetricError.
double score_accuracy(std::span<const Prediction> predictions, const std::string& set);

}  // namespace kebench
