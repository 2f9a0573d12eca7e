// Copyright 2026 The kebench Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "kebench/eval/benchmark.hpp"
#include "kebench/judge/client.hpp"
#include "kebench/paradigms/templates.hpp"
#include "kebench/substrate/language_model.hpp"
#include "kebench/substrate/tokenizer.hpp"

namespace kebench {

struct StepDecision {
  std::string item_id;
  bool keep = false;
  // kept | wrong-answer | correct-answer | unparseable | no-reference | malformed-generation
  std::string reason;
  std::string raw_output;
};

// Step 1: open-book answer must match the gold letter. Unparseable output is
// a drop with its own reason.
StepDecision reference_check(const LanguageModel& model, const QAItem& item,
                             const PromptTemplates& templates);

struct FilterResult {
  std::vector<QAItem> kept;
  std::vector<StepDecision> decisions;
  int unparseable = 0;  // counted as incorrect
};

// Step 2: closed-book; items the model gets wrong (or cannot be parsed) stay.
FilterResult zero_shot_filter(const LanguageModel& model, const std::vector<QAItem>& verified,
                              const PromptTemplates& templates);

struct ScenarioCandidates {
  std::optional<QAItem> gen, ret;
  std::vector<StepDecision> skipped;
};

// Step 3: one generalization and one retention candidate per source item. A
// malformed reply is re-requested once, then skipped.
ScenarioCandidates generate_scenarios(JudgeClient& judge, const QAItem& source,
                                      const PromptTemplates& templates);

struct CandidateFilterResult {
  std::vector<QAItem> gen, ret;
  std::vector<StepDecision> decisions;
  int unparseable = 0;
};

// Step 4: gen kept when the model is wrong, ret kept when it is right.
CandidateFilterResult filter_candidates(const LanguageModel& model, const std::vector<QAItem>& gen,
                                        const std::vector<QAItem>& ret,
                                        const PromptTemplates& templates);

struct LengthStats {
  int count = 0;
  double mean = 0.0;
  std::map<int, int> histogram;  // lower edge of a 10-token bin -> count

  nlohmann::json to_json() const;
};

// Question length in tokens (word count without a tokenizer).
LengthStats length_stats(const std::vector<QAItem>& items, const Tokenizer* tok);

struct BuildReport {
  std::string source_name;
  std::string model_identity;
  std::string judge_identity;
  int loaded = 0;
  int load_errors = 0;
  int capped = 0;  // items left after the per-subject cap
  int verified = 0;
  int q_ori = 0;
  int gen_candidates = 0;
  int ret_candidates = 0;
  int q_gen = 0;
  int q_ret = 0;
  int step1_unparseable = 0;
  int step2_unparseable = 0;
  int step4_unparseable = 0;
  std::map<std::string, int> exclusions;  // "step:reason" -> count
  std::map<std::string, LengthStats> lengths;  // ori / gen / ret

  bool funnel_monotone() const;
  nlohmann::json to_json() const;
  std::string summary() const;
};

// Fails on an empty benchmark.
std::map<std::string, LengthStats> corpus_stats(const EditBenchmark& bench, const Tokenizer* tok);

struct BuildOptions {
  std::string source_name = "corpus";
  int per_subject_cap = 0;  // 0 = no cap, otherwise first N items per subject
};

struct BuildResult {
  EditBenchmark benchmark;
  BuildReport report;
  std::vector<StepDecision> decisions;
};

BuildResult build_benchmark(const LanguageModel& model, JudgeClient& judge,
                            const std::vector<QAItem>& corpus, const PromptTemplates& templates,
                            const BuildOptions& opts = {}, const Tokenizer* tok = nullptr);

// Closed-book accuracies of the bound model on each set; 0 / 0 / 1 for a
// correctly built benchmark.
struct BuildAudit {
  std::optional<double> ori, gen, ret;
  bool holds() const;
};
BuildAudit audit_benchmark(const LanguageModel& model, const EditBenchmark& bench,
                           const PromptTemplates& templates);

// Generated items for human review, one JSON object per line with an
// "approved" flag that defaults to true.
void export_review(const std::filesystem::path& path, const EditBenchmark& bench);

}  // namespace kebench
