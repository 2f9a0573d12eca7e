// Copyright 2026 The kebench Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "kebench/edit/editor.hpp"
#include "kebench/eval/benchmark.hpp"
#include "kebench/eval/report.hpp"
#include "kebench/eval/single_edit.hpp"
#include "kebench/paradigms/paradigms.hpp"
#include "kebench/seq/collapse.hpp"
#include "kebench/seq/external.hpp"

namespace kebench {

std::vector<int> default_checkpoints();
// Default checkpoints up to `total`, always ending at `total`.
std::vector<int> checkpoints_for(int total);

struct ScheduledEdit {
  const QAItem* item = nullptr;
  KnowledgeTarget target;
};

struct SequentialSchedule {
  std::vector<ScheduledEdit> edits;
  std::vector<int> checkpoints = default_checkpoints();
  std::uint64_t seed = 1;
  LayerSpec layers = LayerSpec::standard();

  // Checkpoints strictly increasing, >= 1 and <= the number of edits.
  void validate() const;
  std::uint64_t checkpoint_seed(int index) const;
};

struct CheckpointRecord {
  int index = 0;
  MetricReport internal;
  std::vector<ExternalScores> externals;
  std::optional<CollapseReport> collapse;
  std::string weight_hash;
  std::uint64_t permutation_seed = 0;

  nlohmann::json to_json() const;
};

struct SequentialOptions {
  const EditBenchmark* bench = nullptr;  // internal evaluation
  std::vector<const ExternalBenchmark*> externals;
  std::vector<std::string> probes = default_probe_prompts();
  bool detect_collapse = true;
  InferenceOptions inference{};
  const PromptTemplates* templates = nullptr;
};

struct Trajectory {
  std::string method;
  std::string model_identity;
  std::string base_checksum;
  std::vector<int> checkpoints;
  std::vector<std::string> edit_ids;
  std::vector<ExternalScores> baseline;  // pre-edit external scores
  std::vector<CheckpointRecord> records;
  std::vector<std::string> step_hashes;  // weight hash after each edit
  std::optional<std::pair<int, std::string>> failure;  // (edit index, cause)

  nlohmann::json manifest() const;
  // Directory of checkpoint-NNN.json files plus manifest.json.
  void save(const std::filesystem::path& dir) const;
};

// theta_i = F(theta_{i-1}, q_i, k_i) without intermediate restores; evaluates
// at each checkpoint. An editor failure at step i ends the trajectory with
// the model at its state after step i-1.
Trajectory run_sequential(TransformerModel& model, Editor& editor, const SequentialSchedule& schedule,
                          const SequentialOptions& opts);

// Delta table across trajectories that share checkpoints and edit count.
struct DriftRow {
  std::string key;  // paradigm or paradigm/bucket
  int checkpoint = 0;
  std::string benchmark;
  std::string split;  // "overall" or a split name
  double delta = 0.0;
};

struct DriftTable {
  std::vector<DriftRow> rows;
  std::string to_csv() const;
};

DriftTable compare_paradigm_drift(const std::map<std::string, Trajectory>& trajectories);

}  // namespace kebench
