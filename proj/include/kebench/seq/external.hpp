// Copyright 2026 The kebench Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "kebench/eval/inference.hpp"
#include "kebench/paradigms/qa_item.hpp"
#include "kebench/paradigms/templates.hpp"

namespace kebench {

enum class ScoringRule { kChoice, kExactMatch };

struct ExactItem {
  std::string id;
  std::string question;
  std::string answer;
};

// A general or split-domain benchmark scored outside the edit benchmark.
struct ExternalBenchmark {
  std::string name;
  ScoringRule rule = ScoringRule::kChoice;
  std::vector<QAItem> choice_items;    // kChoice
  std::vector<ExactItem> exact_items;  // kExactMatch
  std::vector<std::string> split;      // one label per item

  std::size_t size() const;
  std::vector<std::string> split_names() const;  // sorted, distinct
  // Labels must cover every item exactly once and be non-empty.
  void validate() const;
};

// Items whose subject is listed are "medical", the rest "non-medical".
ExternalBenchmark load_split_mcq(const std::filesystem::path& path,
                                 const std::set<std::string>& medical_subjects,
                                 std::string name = "split-mcq");
std::set<std::string> load_subject_list(const std::filesystem::path& path);

// JSON Lines {id, question, answer}; a single split named after the set.
ExternalBenchmark load_exact_match(const std::filesystem::path& path,
                                   std::string name = "arithmetic");

struct ExternalScores {
  std::string name;
  std::map<std::string, double> split_accuracy;
  std::map<std::string, int> split_size;
  double overall = 0.0;
  // Filled when a baseline is supplied: accuracy minus the baseline's.
  std::map<std::string, double> split_delta;
  std::optional<double> overall_delta;

  nlohmann::json to_json() const;
};

// First alphanumeric word of the output equals the normalized answer.
bool exact_match(const std::string& output, const std::string& answer);

// Per-split and overall accuracy (overall = size-weighted mean). An empty
// split raises UndefinedMetricError.
ExternalScores eval_external(const LanguageModel& responder, const LanguageModel& generator,
                             const ExternalBenchmark& bench, const PromptTemplates& templates,
                             const ExternalScores* baseline = nullptr);

// Combines per-split results of sizes n_i and accuracies a_i.
double weighted_overall(const std::map<std::string, double>& acc,
                        const std::map<std::string, int>& sizes);

}  // namespace kebench
