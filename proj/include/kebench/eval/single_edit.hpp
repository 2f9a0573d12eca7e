// Copyright 2026 The kebench Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "kebench/edit/editor.hpp"
#include "kebench/eval/benchmark.hpp"
#include "kebench/eval/inference.hpp"
#include "kebench/eval/report.hpp"
#include "kebench/paradigms/paradigms.hpp"

namespace kebench {

// Per-item permutation seed; 0 keeps every item in its stored order.
std::uint64_t derive_seed(std::uint64_t seed, const std::string& key);

struct EvaluationSet {
  std::vector<Prediction> ori, gen, ret;
  MetricReport report() const;
};

// Evaluates the given Q_ori items and every Q_gen/Q_ret item linked to them.
EvaluationSet evaluate_sources(const LanguageModel& responder, const EditBenchmark& bench,
                               const std::vector<const QAItem*>& sources, std::uint64_t seed,
                               const PromptTemplates& templates, const InferenceOptions& inference);

// Whole benchmark without editing; by construction 0 / 0 / 1 for the bound model.
EvaluationSet evaluate_benchmark(const LanguageModel& responder, const EditBenchmark& bench,
                                 std::uint64_t seed, const PromptTemplates& templates,
                                 const InferenceOptions& inference);

EditRequest make_edit_request(const QAItem& item, const KnowledgeTarget& target,
                              const LayerSpec& layers, const PromptTemplates& templates);

struct SingleEditOptions {
  Paradigm paradigm = Paradigm::kGta;
  LayerSpec layers = LayerSpec::standard();
  InferenceOptions inference{};
  std::uint64_t seed = 1;
  bool score_qor = false;
  std::size_t max_items = 0;  // 0 = every Q_ori item
};

struct ItemRecord {
  std::string item_id;
  std::optional<KnowledgeTarget> target;
  std::string excluded;  // reason when the item was skipped
  nlohmann::json outcome;
  EvaluationSet predictions;
  std::optional<QorScores> qor;

  nlohmann::json to_json() const;
};

struct SingleEditResult {
  MetricReport report;
  std::vector<ItemRecord> records;
  std::string base_checksum;
  std::vector<std::pair<std::string, int>> exclusions;  // reason -> count
};

// Per Q_ori item: snapshot, edit with the paradigm's target, evaluate the
// item and its linked Q_gen/Q_ret items, restore. Rejects a benchmark built
// for another model.
SingleEditResult run_single_edit(TransformerModel& model, Editor& editor,
                                 const EditBenchmark& bench, const SingleEditOptions& opts,
                                 const PromptTemplates& templates, JudgeClient* judge = nullptr);

// Same protocol over explicit (item, target) pairs.
SingleEditResult run_single_edit_targets(
    TransformerModel& model, Editor& editor, const EditBenchmark& bench,
    const std::vector<std::pair<const QAItem*, KnowledgeTarget>>& pairs,
    const SingleEditOptions& opts, const PromptTemplates& templates, JudgeClient* judge = nullptr);

struct SweepOptions {
  std::vector<LayerSpec> groups;
  std::vector<Paradigm> paradigms{Paradigm::kGta, Paradigm::kRe};
  std::vector<LengthBucket> buckets = all_length_buckets();
  std::size_t sample_size = 100;
  std::string method = "memit";
  nlohmann::json overrides = nlohmann::json::object();
  std::uint64_t seed = 1;
  InferenceOptions inference{};
};

struct SweepCell {
  std::size_t group = 0;
  LengthBucket bucket = LengthBucket::kUnder10;
  int n_items = 0;
  std::optional<double> avg;
  MetricReport report;
};

struct SweepGrid {
  std::vector<LayerSpec> groups;
  std::vector<LengthBucket> buckets;
  std::vector<SweepCell> cells;  // group-major

  const SweepCell& at(std::size_t group, std::size_t bucket) const;
  std::string to_csv() const;
  nlohmann::json to_json() const;
};

// Rejects overlapping or invalid groups before any edit.
void validate_sweep_groups(const std::vector<LayerSpec>& groups, const Architecture& arch);

// Targets of every Q_ori item under each paradigm, grouped by length bucket
// and capped at the sample size.
std::vector<std::vector<std::pair<const QAItem*, KnowledgeTarget>>> bucket_targets(
    const TransformerModel& model, const EditBenchmark& bench, const SweepOptions& opts,
    const PromptTemplates& templates, JudgeClient* judge);

SweepGrid layer_sweep(TransformerModel& model, const EditBenchmark& bench, const SweepOptions& opts,
                      const EditContext& context, const PromptTemplates& templates,
                      JudgeClient* judge = nullptr);

}  // namespace kebench
