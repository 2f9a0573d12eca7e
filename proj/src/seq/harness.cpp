// Copyright 2026 The kebench Authors
// SPDX-License-Identifier: Apache-2.0

#include "kebench/seq/harness.hpp"

#include <fstream>

#include <fmt/format.h>

#include "kebench/common.hpp"

namespace kebench {

std::vector<int> default_checkpoints() { return {1, 5, 10, 20, 30, 50, 100}; }

std::vector<int> checkpoints_for(int total) {
  std::vector<int> out;
  for (int c : default_checkpoints()) {
    if (c < total) out.push_back(c);
  }
  if (total >= 1) out.push_back(total);
  return out;
}

void SequentialSchedule::validate() const {
  if (edits.empty()) throw ValidationError("sequential schedule has no edits");
  if (checkpoints.empty()) throw ValidationError("sequential schedule has no checkpoints");
  int prev = 0;
  for (int c : checkpoints) {
    if (c <= prev) throw ValidationError("checkpoints must be strictly increasing and >= 1");
    if (c > static_cast<int>(edits.size())) {
      throw ValidationError(fmt::format("checkpoint {} exceeds the {} scheduled edits", c, edits.size()));
    }
    prev = c;
  }
  for (const auto& e : edits) {
    if (!e.item) throw ValidationError("scheduled edit without an item");
  }
}

std::uint64_t SequentialSchedule::checkpoint_seed(int index) const {
  return derive_seed(seed, fmt::format("checkpoint-{}", index));
}

nlohmann::json CheckpointRecord::to_json() const {
  nlohmann::json ext = nlohmann::json::array();
  for (const auto& e : externals) ext.push_back(e.to_json());
  nlohmann::json j{{"index", index},
                   {"internal", internal.to_json()},
                   {"externals", ext},
                   {"weight_hash", weight_hash},
                   {"permutation_seed", permutation_seed}};
  j["collapse"] = collapse ? collapse->to_json() : nlohmann::json(nullptr);
  return j;
}

nlohmann::json Trajectory::manifest() const {
  nlohmann::json base = nlohmann::json::array();
  for (const auto& b : baseline) base.push_back(b.to_json());
  nlohmann::json files = nlohmann::json::array();
  for (const auto& r : records) files.push_back(fmt::format("checkpoint-{:03d}.json", r.index));
  nlohmann::json j{{"method", method},
                   {"model_identity", model_identity},
                   {"base_checksum", base_checksum},
                   {"checkpoints", checkpoints},
                   {"edit_ids", edit_ids},
                   {"step_hashes", step_hashes},
                   {"baseline", base},
                   {"records", files}};
  if (failure) j["failure"] = {{"edit", failure->first}, {"cause", failure->second}};
  return j;
}

void Trajectory::save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  for (const auto& r : records) {
    std::ofstream out(dir / fmt::format("checkpoint-{:03d}.json", r.index), std::ios::binary);
    out << r.to_json().dump(2) << "\n";
  }
  std::ofstream out(dir / "manifest.json", std::ios::binary);
  out << manifest().dump(2) << "\n";
}

Trajectory run_sequential(TransformerModel& model, Editor& editor, const SequentialSchedule& schedule,
                          const SequentialOptions& opts) {
  schedule.validate();
  schedule.layers.validate(model.architecture());
  const PromptTemplates defaults;
  const PromptTemplates& templates = opts.templates ? *opts.templates : defaults;
  OptionLikelihoodModel responder(model, templates.get("edit_prompt"));
  if (opts.bench) check_binding(*opts.bench, responder.identity());

  Trajectory t;
  t.method = editor.name();
  t.model_identity = model.identity();
  t.base_checksum = model.checksum();
  t.checkpoints = schedule.checkpoints;
  for (const auto& e : schedule.edits) t.edit_ids.push_back(e.item->id);

  std::optional<double> em_baseline;
  for (const auto* ext : opts.externals) {
    t.baseline.push_back(eval_external(responder, model, *ext, templates));
    if (ext->rule == ScoringRule::kExactMatch && !em_baseline) em_baseline = t.baseline.back().overall;
  }

  std::size_t next_cp = 0;
  std::vector<const QAItem*> edited;
  for (std::size_t i = 0; i < schedule.edits.size() && next_cp < schedule.checkpoints.size(); ++i) {
    const auto& e = schedule.edits[i];
    const Checkpoint before = model.snapshot();
    EditRequest req = make_edit_request(*e.item, e.target, schedule.layers, templates);
    try {
      editor.apply(model, std::span<const EditRequest>(&req, 1));
    } catch (const Error& err) {
      model.restore(before);
      t.failure = {static_cast<int>(i) + 1, err.what()};
      break;
    }
    edited.push_back(e.item);
    t.step_hashes.push_back(model.checksum());
    const int index = static_cast<int>(i) + 1;
    if (index != schedule.checkpoints[next_cp]) continue;
    ++next_cp;

    CheckpointRecord rec;
    rec.index = index;
    rec.permutation_seed = schedule.checkpoint_seed(index);
    rec.weight_hash = t.step_hashes.back();
    if (opts.bench) {
      rec.internal = evaluate_sources(responder, *opts.bench, edited, rec.permutation_seed, templates,
                                      opts.inference)
                         .report();
    }
    std::optional<double> em;
    for (std::size_t k = 0; k < opts.externals.size(); ++k) {
      rec.externals.push_back(eval_external(responder, model, *opts.externals[k], templates, &t.baseline[k]));
      if (opts.externals[k]->rule == ScoringRule::kExactMatch && !em) em = rec.externals.back().overall;
    }
    if (opts.detect_collapse) rec.collapse = detect_collapse(model, opts.probes, em, em_baseline);
    t.records.push_back(std::move(rec));
  }
  return t;
}

std::string DriftTable::to_csv() const {
  std::string out = "key,checkpoint,benchmark,split,delta\n";
  for (const auto& r : rows) {
    out += fmt::format("{},{},{},{},{:.6f}\n", r.key, r.checkpoint, r.benchmark, r.split, r.delta);
  }
  return out;
}

DriftTable compare_paradigm_drift(const std::map<std::string, Trajectory>& trajectories) {
  if (trajectories.empty()) throw ValidationError("no trajectories to compare");
  const Trajectory& first = trajectories.begin()->second;
  for (const auto& [key, t] : trajectories) {
    if (t.checkpoints != first.checkpoints || t.edit_ids.size() != first.edit_ids.size() ||
        t.model_identity != first.model_identity) {
      throw ValidationError("trajectory " + key + " does not share the schedule or base model of " +
                            trajectories.begin()->first);
    }
  }
  DriftTable table;
  for (const auto& [key, t] : trajectories) {
    for (const auto& rec : t.records) {
      for (const auto& ext : rec.externals) {
        if (!ext.overall_delta) continue;
        table.rows.push_back({key, rec.index, ext.name, "overall", *ext.overall_delta});
        for (const auto& [split, d] : ext.split_delta) {
          table.rows.push_back({key, rec.index, ext.name, split, d});
        }
      }
    }
  }
  return table;
}

}  // namespace kebench
