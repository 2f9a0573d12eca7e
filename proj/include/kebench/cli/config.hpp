// Copyright 2026 The kebench Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "kebench/edit/types.hpp"
#include "kebench/eval/inference.hpp"
#include "kebench/judge/client.hpp"
#include "kebench/paradigms/paradigms.hpp"

namespace kebench {

// "transformer" loads a fixture file or checkpoint directory; "scripted" loads
// a rule file (bench-build only).
struct ModelRef {
  std::string kind = "transformer";
  std::string path;
};

// scripted: rule file; replay: saved transcript; live: HTTP endpoint from
// `config` with the key read from config.credential_env.
struct JudgeRef {
  std::string mode = "scripted";
  std::string path;
  JudgeConfig config;
};

// kind "split-mcq" (path + subjects list) or "exact-match" (path).
struct ExternalRef {
  std::string kind;
  std::string name;
  std::string path;
  std::string subjects;
};

// Effective configuration of one run. Every field has a default except the
// command and the seed; to_json() is the canonical form that gets hashed and
// stored with the run.
struct RunConfig {
  std::string command;  // bench-build | edit-eval | seq-run | layer-sweep
  ModelRef model;
  std::string benchmark;  // benchmark directory (edit-eval, seq-run, layer-sweep)
  std::string label;      // table column; defaults to the benchmark directory name
  std::string corpus;     // source items (bench-build)
  std::string source_name = "corpus";
  int per_subject_cap = 0;
  std::optional<JudgeRef> judge;
  std::string method = "memit";
  nlohmann::json overrides = nlohmann::json::object();
  std::vector<Paradigm> paradigms{Paradigm::kGta};
  InferenceMode inference = InferenceMode::kTwoStep;
  LayerSpec layers = LayerSpec::standard();
  std::string schedule = "single";  // single | sequential
  std::vector<int> checkpoints;     // empty = standard checkpoints up to `edits`
  int edits = 0;                    // sequential edit count; 0 = last checkpoint
  std::uint64_t seed = 0;
  std::size_t max_items = 0;
  bool score_qor = false;
  bool detect_collapse = true;
  std::vector<ExternalRef> externals;
  std::vector<LayerSpec> sweep_groups;
  std::size_t sample_size = 100;
  std::string templates;          // optional directory of <name>.txt overrides
  std::string covariance_sample;  // optional text file; default is the fixture corpus
  std::string preserved_prompts;  // optional text file, one prompt per line
  std::string output_dir = "runs";

  nlohmann::json to_json() const;
  static RunConfig from_json(const nlohmann::json& j);
  // SHA-256 of the canonical JSON (keys sorted), so key order never matters.
  std::string hash() const;
  // Field-level checks plus every referenced file, before anything is loaded.
  // Reports all problems at once.
  void validate() const;
};

// "a.b.c=value": value is parsed as JSON when it parses, else taken as a string.
void apply_override(nlohmann::json& config, const std::string& assignment);

RunConfig load_run_config(const std::filesystem::path& path,
                          const std::vector<std::string>& overrides = {});

}  // namespace kebench
